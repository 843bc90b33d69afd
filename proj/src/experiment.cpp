#include "linc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "linc/error.hpp"
#include "linc/rng.hpp"

namespace linc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::pair<std::string, std::string> split_pair(const std::string& s, const std::string& sep, const std::string& what) {
  const auto pos = s.find(sep);
  if (pos == std::string::npos) throw ConfigError(what + ": expected 'A " + sep + " B', got '" + s + "'");
  return {trim(s.substr(0, pos)), trim(s.substr(pos + sep.size()))};
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(trim(s), &used);
    if (used != trim(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": not a number: '" + s + "'");
  }
}

long long to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(trim(s), &used);
    if (used != trim(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": not an integer: '" + s + "'");
  }
}

bool to_bool(const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw UsageError("not a boolean: '" + s + "'");
}

bool same(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  const auto t = trim(text);
  if (t.empty()) throw UsageError("empty list");
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) throw UsageError("range must be start:stop:step, got '" + text + "'");
    const double a = to_double(parts[0], "range"), b = to_double(parts[1], "range"), s = to_double(parts[2], "range");
    if (!(s > 0.0) || b < a) throw UsageError("range needs step > 0 and stop >= start");
    const auto steps = static_cast<long>(std::floor((b - a) / s + 1e-9));
    for (long i = 0; i <= steps; ++i) out.push_back(a + i * s);
    return out;
  }
  for (const auto& p : split(t, ',')) out.push_back(to_double(p, "list"));
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  const auto t = trim(text);
  if (t.empty()) throw UsageError("empty list");
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) throw UsageError("range must be start:stop:step, got '" + text + "'");
    const auto a = to_int(parts[0], "range"), b = to_int(parts[1], "range"), s = to_int(parts[2], "range");
    if (s <= 0 || b < a) throw UsageError("range needs step > 0 and stop >= start");
    for (auto v = a; v <= b; v += s) out.push_back(static_cast<int>(v));
    return out;
  }
  for (const auto& p : split(t, ',')) out.push_back(static_cast<int>(to_int(p, "list")));
  return out;
}

std::vector<int> ExperimentSpec::n_values() const {
  std::set<int> out;
  for (int n : ns) out.insert(n);
  for (double r : rates) out.insert(static_cast<int>(std::lround(k * r)));
  if (out.empty()) out.insert(k);
  for (int n : out)
    if (n < k) throw UsageError("sweep: n=" + std::to_string(n) + " is below k=" + std::to_string(k));
  return {out.begin(), out.end()};
}

void ExperimentSpec::validate() const {
  if (epsilons.empty()) throw UsageError("sweep: empty epsilon grid");
  for (double e : epsilons)
    if (!(e >= 0.0 && e < 1.0)) throw UsageError("sweep: epsilon must be in [0, 1)");
  if (k <= 0 || k > CodingParams::kMaxN) throw UsageError("sweep: k must be in [1, 255]");
  for (int n : n_values())
    if (n > CodingParams::kMaxN) throw UsageError("sweep: n must be <= 255");
  if (!(target_utilization > 0.0 && target_utilization < 1.0)) throw UsageError("sweep: target utilization must be in (0, 1)");
  if (!(rate_scale > 0.0)) throw UsageError("sweep: rate scale must be positive");
  if (!(duration_s > 0.0)) throw UsageError("sweep: duration must be positive");
  if (scenario != "scenario1") {
    if (graphml.empty()) throw UsageError("sweep: scenario '" + scenario + "' needs a topology file");
    if (lossy_a.empty() || lossy_b.empty()) throw UsageError("sweep: lossy link endpoints missing");
    if (flow_pairs.empty()) throw UsageError("sweep: no flow pairs");
  }
}

ExperimentSpec default_spec(const std::string& scenario) {
  ExperimentSpec s;
  s.scenario = scenario;
  for (std::uint64_t i = 1; i <= 10; ++i) s.seeds.push_back(i);
  for (int i = 0; i < 40; ++i) s.rates.push_back(1.0 + 0.4 * i / 39.0);
  if (scenario != "scenario1") {
    // Geographic latencies are a few ms, so blocks must fill much faster than an RTT.
    s.rate_scale = 0.01;
    s.duration_s = 4.0;
    s.routing = RoutingMode::kThroughLossy;
  }
  return s;
}

void apply_config_text(ExperimentSpec& spec, const std::string& text, const std::string& base_dir) {
  bool flows_reset = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "scenario") {
        spec.scenario = value;
      } else if (key == "topology") {
        std::filesystem::path p(value);
        spec.graphml = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).lexically_normal().string();
      } else if (key == "lossy_link") {
        std::tie(spec.lossy_a, spec.lossy_b) = split_pair(value, "--", "lossy_link");
      } else if (key == "flow") {
        if (!flows_reset) spec.flow_pairs.clear(), flows_reset = true;
        spec.flow_pairs.push_back(split_pair(value, "->", "flow"));
      } else if (key == "routing") {
        if (value == "shortest") spec.routing = RoutingMode::kShortest;
        else if (value == "through-lossy") spec.routing = RoutingMode::kThroughLossy;
        else throw ConfigError("routing must be 'shortest' or 'through-lossy'");
      } else if (key == "epsilon") {
        spec.epsilons = parse_double_list(value);
      } else if (key == "k") {
        spec.k = static_cast<int>(to_int(value, key));
      } else if (key == "n") {
        spec.ns = parse_int_list(value);
        spec.rates.clear();
      } else if (key == "rate") {
        spec.rates = parse_double_list(value);
        spec.ns.clear();
      } else if (key == "seed") {
        spec.topology_seed = static_cast<std::uint64_t>(to_int(value, key));
      } else if (key == "seeds") {
        spec.seeds.clear();
        for (int s : parse_int_list(value)) spec.seeds.push_back(static_cast<std::uint64_t>(s));
      } else if (key == "target_utilization") {
        spec.target_utilization = to_double(value, key);
      } else if (key == "rate_scale") {
        spec.rate_scale = to_double(value, key);
      } else if (key == "duration") {
        spec.duration_s = to_double(value, key);
      } else if (key == "warmup") {
        spec.warmup_s = to_double(value, key);
      } else if (key == "packet_bytes") {
        spec.packet_bytes = static_cast<std::uint32_t>(to_int(value, key));
      } else if (key == "reorder_window_rtt") {
        spec.reorder_window_rtt = to_double(value, key);
      } else if (key == "rto_multiplier") {
        spec.rto_multiplier = to_double(value, key);
      } else if (key == "ack_lossy") {
        spec.ack_lossy = to_bool(value);
      } else if (key == "workers") {
        spec.workers = static_cast<unsigned>(to_int(value, key));
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(ExperimentSpec& spec, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(spec, buf.str(), std::filesystem::path(path).parent_path().string());
}

PreparedScenario prepare(const ExperimentSpec& spec, double epsilon) {
  spec.validate();
  PreparedScenario out;
  std::vector<FlowSpec> flows;
  if (spec.scenario == "scenario1") {
    auto sc = builtin_scenario1(spec.topology_seed);
    out.topology = mark_lossy(sc.topology, "s3", "s4", epsilon);
    flows = sc.flows;
  } else {
    out.topology = mark_lossy(load_graphml(spec.graphml), spec.lossy_a, spec.lossy_b, epsilon);
    std::mt19937_64 rng(derive_seed(spec.topology_seed, "scenario-rates", 0));
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (const auto& [src, dst] : spec.flow_pairs)
      flows.push_back({out.topology.find_node(src), out.topology.find_node(dst), u(rng)});
  }
  out.topology.scale_rates(spec.rate_scale);
  out.flows = normalize_load(out.topology, route(out.topology, flows, spec.routing), spec.target_utilization,
                             spec.packet_bytes);
  return out;
}

SimConfig make_sim_config(const ExperimentSpec& spec, const PreparedScenario& sc, double epsilon, int n,
                          std::uint64_t seed) {
  (void)epsilon;
  SimConfig cfg;
  cfg.topology = sc.topology;
  cfg.flows = sc.flows;
  cfg.coding = {spec.k, n};
  cfg.packet_bytes = spec.packet_bytes;
  cfg.duration_s = spec.duration_s;
  cfg.warmup_s = spec.warmup_s;
  cfg.seed = seed;
  cfg.rto_multiplier = spec.rto_multiplier;
  cfg.reorder_window_rtt = spec.reorder_window_rtt;
  cfg.ack_lossy = spec.ack_lossy;
  return cfg;
}

std::string CsvTable::to_string() const {
  std::ostringstream out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) throw UsageError("csv: row has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw UsageError("csv: empty input");
  return t;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw UsageError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable cmd_model(const ExperimentSpec& spec) {
  CsvTable t;
  t.header = kModelColumns;
  const auto ns = spec.n_values();
  for (double eps : spec.epsilons) {
    const auto sc = prepare(spec, eps);
    const auto ensemble = to_ensemble(sc.flows);
    for (int n : ns) {
      const CodingParams params{spec.k, n};
      const auto rep = goodput_ratio(ensemble, params, {eps});
      t.rows.push_back({spec.scenario, format_double(eps), std::to_string(spec.k), std::to_string(n),
                        format_double(params.rate()), format_double(rep.r_linc), format_double(rep.r_nonc),
                        format_double(rep.lambda_linc), format_double(rep.lambda_linc_prime),
                        format_double(rep.lambda_nonc), format_double(rep.lambda_nonc_prime),
                        format_double(rep.aggregate_linc()), format_double(rep.aggregate_nonc()),
                        format_double(rep.g_linc), format_double(rep.g_nonc), format_double(rep.delta)});
    }
  }
  return t;
}

std::vector<SimRun> run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.seeds.empty()) throw UsageError("sweep: no seeds");
  std::vector<PreparedScenario> scenarios;
  for (double eps : spec.epsilons) scenarios.push_back(prepare(spec, eps));

  std::vector<SimRun> runs;
  std::vector<std::size_t> scenario_of;
  for (std::size_t e = 0; e < spec.epsilons.size(); ++e)
    for (int n : spec.n_values())
      for (auto seed : spec.seeds) {
        runs.push_back({spec.epsilons[e], spec.k, n, seed, {}});
        scenario_of.push_back(e);
      }

  parallel_for(runs.size(), spec.workers, [&](std::size_t i) {
    auto& r = runs[i];
    r.metrics = run(make_sim_config(spec, scenarios[scenario_of[i]], r.epsilon, r.n, r.seed));
  });
  std::sort(runs.begin(), runs.end(), [](const SimRun& a, const SimRun& b) {
    return std::tie(a.epsilon, a.k, a.n, a.seed) < std::tie(b.epsilon, b.k, b.n, b.seed);
  });
  return runs;
}

CsvTable sim_table(const std::string& scenario, const std::vector<SimRun>& runs) {
  CsvTable t;
  t.header = kSimColumns;
  auto key_cells = [&](const SimRun& r, const std::string& seed) {
    return std::vector<std::string>{scenario, format_double(r.epsilon), std::to_string(r.k), std::to_string(r.n), seed};
  };

  std::size_t i = 0;
  while (i < runs.size()) {
    std::size_t j = i;
    while (j < runs.size() && runs[j].epsilon == runs[i].epsilon && runs[j].k == runs[i].k && runs[j].n == runs[i].n) ++j;

    std::vector<double> rate, retrans, recovered, delivered, delay;
    for (std::size_t r = i; r < j; ++r) {
      const auto& m = runs[r].metrics;
      const auto seed = std::to_string(runs[r].seed);
      auto run_cells = [&](std::vector<std::string> row, const std::string& link, double arrival) {
        row.insert(row.end(), {link, format_double(arrival), format_double(m.retrans_rate), std::to_string(m.recovered),
                               std::to_string(m.delivered), format_double(m.mean_delay_s)});
        return row;
      };
      for (const auto& l : m.links) t.rows.push_back(run_cells(key_cells(runs[r], seed), std::to_string(l.link), l.arrival_rate_pps));
      t.rows.push_back(run_cells(key_cells(runs[r], seed), "all", m.aggregate_rate_pps));
      rate.push_back(m.aggregate_rate_pps);
      retrans.push_back(m.retrans_rate);
      recovered.push_back(static_cast<double>(m.recovered));
      delivered.push_back(static_cast<double>(m.delivered));
      delay.push_back(m.mean_delay_s);
    }

    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / v.size();
    };
    auto stderr_of = [&mean](const std::vector<double>& v) {
      if (v.size() < 2) return 0.0;
      const double mu = mean(v);
      double ss = 0.0;
      for (double x : v) ss += (x - mu) * (x - mu);
      return std::sqrt(ss / (v.size() - 1) / v.size());
    };
    for (const char* which : {"mean", "stderr"}) {
      auto f = std::string(which) == "mean" ? std::function<double(const std::vector<double>&)>(mean)
                                            : std::function<double(const std::vector<double>&)>(stderr_of);
      auto row = key_cells(runs[i], which);
      row.insert(row.end(), {"all", format_double(f(rate)), format_double(f(retrans)), format_double(f(recovered)),
                             format_double(f(delivered)), format_double(f(delay))});
      t.rows.push_back(std::move(row));
    }
    i = j;
  }
  return t;
}

CsvTable cmd_sim(const ExperimentSpec& spec) { return sim_table(spec.scenario, run_sweep(spec)); }

bool CompareReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const CompareRow& r) { return r.ok; });
}

CsvTable CompareReport::table() const {
  CsvTable t;
  t.header = {"epsilon", "k", "n", "model_rate", "sim_rate", "rate_rel_err", "model_retrans", "sim_retrans",
              "retrans_abs_err", "ok"};
  for (const auto& r : rows)
    t.rows.push_back({format_double(r.epsilon), std::to_string(r.k), std::to_string(r.n), format_double(r.model_rate),
                      format_double(r.sim_rate), format_double(r.rate_rel_err), format_double(r.model_retrans),
                      format_double(r.sim_retrans), format_double(r.retrans_abs_err), r.ok ? "1" : "0"});
  return t;
}

CompareReport cmd_compare(const CsvTable& model, const CsvTable& sim, const CompareTolerance& tol) {
  const auto me = model.column("epsilon"), mk = model.column("k"), mn = model.column("n");
  const auto mrate = model.column("aggregate_linc"), mr = model.column("r_linc");
  const auto se = sim.column("epsilon"), sk = sim.column("k"), sn = sim.column("n"), sseed = sim.column("seed");
  const auto slink = sim.column("link_id"), srate = sim.column("arrival_rate_pps"), sr = sim.column("retrans_rate");

  // Per key: the "mean" row if present, otherwise the average of per-seed "all" rows.
  struct Acc {
    double eps;
    int k, n;
    double rate = 0, retrans = 0;
    int count = 0;
    bool from_mean = false;
  };
  std::vector<Acc> keys;
  for (const auto& row : sim.rows) {
    if (row[slink] != "all" || row[sseed] == "stderr") continue;
    const double eps = to_double(row[se], "epsilon");
    const int k = static_cast<int>(to_int(row[sk], "k")), n = static_cast<int>(to_int(row[sn], "n"));
    auto it = std::find_if(keys.begin(), keys.end(), [&](const Acc& a) { return same(a.eps, eps) && a.k == k && a.n == n; });
    if (it == keys.end()) it = keys.insert(keys.end(), Acc{eps, k, n});
    const bool is_mean = row[sseed] == "mean";
    if (it->from_mean) continue;
    if (is_mean) *it = Acc{eps, k, n, 0, 0, 0, true};
    it->rate += to_double(row[srate], "arrival_rate_pps");
    it->retrans += to_double(row[sr], "retrans_rate");
    ++it->count;
  }
  if (keys.empty()) throw UsageError("compare: simulation table has no aggregate rows");

  CompareReport rep;
  for (const auto& a : keys) {
    const auto mrow = std::find_if(model.rows.begin(), model.rows.end(), [&](const auto& r) {
      return same(to_double(r[me], "epsilon"), a.eps) && to_int(r[mk], "k") == a.k && to_int(r[mn], "n") == a.n;
    });
    if (mrow == model.rows.end())
      throw UsageError("compare: no model row for epsilon=" + format_double(a.eps) + " k=" + std::to_string(a.k) +
                       " n=" + std::to_string(a.n));
    CompareRow c{a.eps, a.k, a.n, to_double((*mrow)[mrate], "rate"), a.rate / a.count, 0.0,
                 to_double((*mrow)[mr], "r_linc"), a.retrans / a.count, 0.0, true};
    c.rate_rel_err = std::abs(c.sim_rate - c.model_rate) / c.model_rate;
    c.retrans_abs_err = std::abs(c.sim_retrans - c.model_retrans);
    c.ok = c.rate_rel_err <= tol.rate_rel && c.retrans_abs_err <= std::max(tol.rate_rel * c.model_retrans, tol.retrans_abs);
    rep.rows.push_back(c);
  }
  return rep;
}

OptimizeReport cmd_optimize(const ExperimentSpec& spec, double epsilon, int k_max, int n_max) {
  const auto sc = prepare(spec, epsilon);
  const auto ensemble = to_ensemble(sc.flows);
  OptimizeReport rep;
  rep.best = optimize_params(ensemble, {epsilon}, k_max, n_max, spec.workers);
  rep.surface.header = {"k", "n", "rate", "delta"};
  for (const auto& p : delta_surface(ensemble, {epsilon}, k_max, n_max, spec.workers))
    rep.surface.rows.push_back({std::to_string(p.k), std::to_string(p.n),
                                format_double(static_cast<double>(p.n) / p.k), format_double(p.delta)});
  return rep;
}

}  // namespace linc
