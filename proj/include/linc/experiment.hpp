#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linc/analytic_model.hpp"
#include "linc/simulator.hpp"
#include "linc/topology.hpp"

namespace linc {

/// Everything a sweep needs. Built-in scenario defaults, then a preset file,
/// then command-line flags, each overriding the previous layer.
struct ExperimentSpec {
  std::string scenario = "scenario1";  // "scenario1" or a name for a GraphML-based preset
  std::string graphml;                 // topology file for non-builtin scenarios
  std::string lossy_a;
  std::string lossy_b;
  std::vector<std::pair<std::string, std::string>> flow_pairs;
  RoutingMode routing = RoutingMode::kShortest;

  std::vector<double> epsilons{0.05};
  int k = 50;
  std::vector<int> ns;        // explicit n values, or
  std::vector<double> rates;  // n/k values (n = round(k * rate))
  std::vector<std::uint64_t> seeds;

  double target_utilization = 0.5;
  double rate_scale = 5e-4;   // desk-scale compression of every link rate
  std::uint64_t topology_seed = 1;  // draws the relative sender rates
  double duration_s = 60.0;
  std::optional<double> warmup_s;
  std::uint32_t packet_bytes = kDefaultPacketBytes;
  double reorder_window_rtt = 0.25;
  double rto_multiplier = 3.0;
  bool ack_lossy = false;
  unsigned workers = 0;  // 0: hardware concurrency
  std::string out_dir = ".";

  /// n values of the sweep, sorted and deduplicated; validates n >= k.
  std::vector<int> n_values() const;
  void validate() const;
};

/// Defaults for "scenario1" (desk-scale chain) and generic GraphML presets.
ExperimentSpec default_spec(const std::string& scenario);

/// Apply `key = value` lines (with '#' comments) on top of `spec`. Relative
/// topology paths resolve against `base_dir`. Throws ConfigError on unknown keys.
void apply_config_text(ExperimentSpec& spec, const std::string& text, const std::string& base_dir = ".");
void apply_config_file(ExperimentSpec& spec, const std::string& path);

/// "0.01,0.05,0.1" or "start:stop:step" (inclusive).
std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// Topology with the lossy link marked at epsilon and rates scaled, plus
/// routed flows normalized to the target utilization.
struct PreparedScenario {
  Topology topology;
  std::vector<RoutedFlow> flows;
};
PreparedScenario prepare(const ExperimentSpec& spec, double epsilon);

SimConfig make_sim_config(const ExperimentSpec& spec, const PreparedScenario& sc, double epsilon, int n,
                          std::uint64_t seed);

/// %.9g
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
  static CsvTable parse(const std::string& text);
  std::size_t column(const std::string& name) const;  // throws UsageError if absent
};

inline const std::vector<std::string> kModelColumns = {
    "scenario", "epsilon", "k", "n", "rate", "r_linc", "r_nonc", "lambda_linc", "lambda_linc_prime",
    "lambda_nonc", "lambda_nonc_prime", "aggregate_linc", "aggregate_nonc", "g_linc", "g_nonc", "delta"};

inline const std::vector<std::string> kSimColumns = {
    "scenario", "epsilon", "k", "n", "seed", "link_id", "arrival_rate_pps", "retrans_rate", "recovered",
    "delivered", "mean_delay_s"};

/// Analytic curves: one row per (epsilon, n).
CsvTable cmd_model(const ExperimentSpec& spec);

struct SimRun {
  double epsilon;
  int k;
  int n;
  std::uint64_t seed;
  SimMetrics metrics;
};

/// Every (epsilon, n, seed) simulation, sorted by key; runs on spec.workers threads.
std::vector<SimRun> run_sweep(const ExperimentSpec& spec);

/// Per-link rows, one "all" row per run, then mean and stderr rows per key.
CsvTable sim_table(const std::string& scenario, const std::vector<SimRun>& runs);
CsvTable cmd_sim(const ExperimentSpec& spec);

struct CompareTolerance {
  double rate_rel = 0.05;
  double retrans_abs = 1e-3;
};

struct CompareRow {
  double epsilon;
  int k;
  int n;
  double model_rate, sim_rate, rate_rel_err;
  double model_retrans, sim_retrans, retrans_abs_err;
  bool ok;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  bool all_ok() const;
  CsvTable table() const;
};

/// Compare simulated aggregate rate and retransmission rate with the model
/// for each (epsilon, k, n) of the sim table. Throws UsageError when a sim
/// key has no model row.
CompareReport cmd_compare(const CsvTable& model, const CsvTable& sim, const CompareTolerance& tol = {});

struct OptimizeReport {
  OptimizeResult best;
  CsvTable surface;  // k, n, rate, delta
};
OptimizeReport cmd_optimize(const ExperimentSpec& spec, double epsilon, int k_max, int n_max);

}  // namespace linc
