"""LINC link-local erasure coding toolkit."""

from ._linc import (  # noqa: F401
    DivergenceError,
    ParameterError,
    UsageError,
    decode,
    encode,
    gf_inv,
    gf_mul,
    goodput_ratio,
    model_csv,
    optimize,
    retrans_rate_linc,
    sim_csv,
)
