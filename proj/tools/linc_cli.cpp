// linc: model / sim / compare / optimize front end. Writes CSV.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "linc/error.hpp"
#include "linc/experiment.hpp"

namespace {

struct Flags {
  std::string scenario;
  std::string graphml;
  std::string config;
  std::string epsilon, n, rate, seeds;
  int k = 0;
  double duration = 0.0;
  double warmup = -1.0;
  std::string out;
  unsigned workers = 0;
  bool workers_set = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--scenario", f.scenario, "scenario1, or a name for a GraphML preset");
  cmd->add_option("--graphml", f.graphml, "Topology Zoo GraphML file");
  cmd->add_option("--config", f.config, "key = value preset file");
  cmd->add_option("--epsilon", f.epsilon, "erasure probabilities: list a,b,c or range start:stop:step");
  cmd->add_option("--k", f.k, "block size");
  cmd->add_option("--n", f.n, "code lengths (list or range)");
  cmd->add_option("--rate", f.rate, "n/k values (list or range)");
  cmd->add_option("--seeds", f.seeds, "simulation seeds (list or range)");
  cmd->add_option("--duration", f.duration, "simulated seconds per run");
  cmd->add_option("--warmup", f.warmup, "seconds excluded from metrics");
  cmd->add_option("--out", f.out, "output file, '-' for stdout");
  cmd->add_option("--workers", f.workers, "worker threads (0: all cores)");
}

linc::ExperimentSpec build_spec(const Flags& f) {
  // Scenario name may come from the config itself, so peek first.
  std::string scenario = f.scenario.empty() ? "scenario1" : f.scenario;
  if (f.scenario.empty() && !f.config.empty()) {
    linc::ExperimentSpec probe;
    linc::apply_config_file(probe, f.config);
    scenario = probe.scenario;
  }
  auto spec = linc::default_spec(scenario);
  if (!f.config.empty()) linc::apply_config_file(spec, f.config);
  if (!f.scenario.empty()) spec.scenario = f.scenario;
  if (!f.graphml.empty()) spec.graphml = f.graphml;
  if (!f.epsilon.empty()) spec.epsilons = linc::parse_double_list(f.epsilon);
  if (f.k > 0) spec.k = f.k;
  if (!f.n.empty() && !f.rate.empty()) throw linc::UsageError("give --n or --rate, not both");
  if (!f.n.empty()) spec.ns = linc::parse_int_list(f.n), spec.rates.clear();
  if (!f.rate.empty()) spec.rates = linc::parse_double_list(f.rate), spec.ns.clear();
  if (!f.seeds.empty()) {
    spec.seeds.clear();
    for (int s : linc::parse_int_list(f.seeds)) spec.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (f.duration > 0.0) spec.duration_s = f.duration;
  if (f.warmup >= 0.0) spec.warmup_s = f.warmup;
  if (f.workers_set) spec.workers = f.workers;
  spec.validate();
  return spec;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  const std::filesystem::path p(out);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw linc::UsageError("cannot write '" + out + "'");
  f << text;
}

linc::CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw linc::UsageError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return linc::CsvTable::parse(buf.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LINC link-local erasure coding toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* model = app.add_subcommand("model", "analytic curves as CSV");
  auto* sim = app.add_subcommand("sim", "simulator sweep as CSV");
  auto* optimize = app.add_subcommand("optimize", "best (k, n) plus the delta surface");
  auto* compare = app.add_subcommand("compare", "simulated vs analytic rates");
  for (auto* c : {model, sim, optimize}) add_common(c, f);

  int k_max = 80, n_max = 120;
  optimize->add_option("--k-max", k_max, "largest k searched");
  optimize->add_option("--n-max", n_max, "largest n searched");

  std::string model_csv, sim_csv;
  linc::CompareTolerance tol;
  compare->add_option("model_csv", model_csv)->required();
  compare->add_option("sim_csv", sim_csv)->required();
  compare->add_option("--rate-tol", tol.rate_rel, "relative tolerance");
  compare->add_option("--retrans-abs-tol", tol.retrans_abs, "absolute floor for retransmission rates");
  compare->add_option("--out", f.out, "report file, '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  for (auto* c : {model, sim, optimize})
    if (c->parsed() && c->count("--workers")) f.workers_set = true;

  try {
    if (model->parsed()) {
      emit(f.out, linc::cmd_model(build_spec(f)).to_string());
    } else if (sim->parsed()) {
      emit(f.out, linc::cmd_sim(build_spec(f)).to_string());
    } else if (optimize->parsed()) {
      const auto spec = build_spec(f);
      if (spec.epsilons.size() != 1) throw linc::UsageError("optimize takes a single --epsilon");
      const auto rep = linc::cmd_optimize(spec, spec.epsilons.front(), k_max, n_max);
      std::cerr << "best k=" << rep.best.k << " n=" << rep.best.n << " delta=" << linc::format_double(rep.best.delta)
                << '\n';
      emit(f.out, rep.surface.to_string());
    } else if (compare->parsed()) {
      const auto rep = linc::cmd_compare(read_csv(model_csv), read_csv(sim_csv), tol);
      emit(f.out, rep.table().to_string());
      if (!rep.all_ok()) {
        std::cerr << "compare: tolerance exceeded\n";
        return 2;
      }
    }
  } catch (const linc::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const linc::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const linc::IngestionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const linc::RoutingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const linc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
