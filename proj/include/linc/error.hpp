#pragma once

#include <stdexcept>
#include <string>

namespace linc {

// Error categories map one-to-one onto CLI exit codes (see tools/linc_cli.cpp).

/// Invalid (k, n), probability or other numeric parameter.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller violated an operation's precondition (wrong payload count, duplicate index, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A geometric retransmission series with ratio >= 1.
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or incomplete input files (GraphML, presets).
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreachable destinations or paths that cannot serve the experiment.
class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration that names things which do not exist.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace linc
