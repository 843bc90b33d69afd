"""Plot linc CSV output against the coding rate n/k.

    python docs/plot.py model.csv --y aggregate_linc --group epsilon -o fig.png
    python docs/plot.py model.csv sim.csv --y aggregate_linc,arrival_rate_pps -o fig.png

Simulation files are reduced to their per-key "mean" rows (link "all").
Extra files are overlaid, so a model and a sim CSV can share one axis.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def load(path):
    df = pd.read_csv(path, dtype={"seed": str, "link_id": str})
    if "seed" in df.columns:
        df = df[(df["seed"] == "mean") & (df["link_id"] == "all")].copy()
    df["rate"] = df["n"] / df["k"]
    return df


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", nargs="+")
    ap.add_argument("--y", required=True, help="column to plot; a comma list takes the first present in each file")
    ap.add_argument("--group", default="epsilon", help="one curve per value of this column")
    ap.add_argument("--baseline", help="dotted reference column, e.g. aggregate_nonc")
    ap.add_argument("--logy", action="store_true")
    ap.add_argument("-o", "--out", default="plot.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for path in args.csv:
        df = load(path)
        y = next(c for c in args.y.split(",") if c in df.columns)
        for key, g in df.groupby(args.group):
            g = g.sort_values("rate")
            ax.plot(g["rate"], g[y], marker=".", label=f"{args.group}={key} ({path})")
            if args.baseline and args.baseline in g:
                ax.plot(g["rate"], g[args.baseline], linestyle=":", color=ax.lines[-1].get_color())
    ax.set_xlabel("n/k")
    ax.set_ylabel(args.y.split(",")[0])
    if args.logy:
        ax.set_yscale("log")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
