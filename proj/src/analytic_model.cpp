#include "linc/analytic_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <string>
#include <thread>

#include "linc/error.hpp"

namespace linc {

namespace {

// ln(i!) for i <= 255 via lgamma, computed once.
const std::array<double, CodingParams::kMaxN + 1>& log_factorials() {
  static const auto table = [] {
    std::array<double, CodingParams::kMaxN + 1> t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return t;
  }();
  return table;
}

double log_choose(int a, int b) {
  const auto& lf = log_factorials();
  return lf[a] - lf[b] - lf[a - b];
}

void check_ratio(double r, const char* what) {
  if (!(r < 1.0)) throw DivergenceError(std::string(what) + ": retransmission probability must be < 1");
  if (r < 0.0) throw ParameterError(std::string(what) + ": negative retransmission probability");
}

unsigned resolve_workers(unsigned workers) {
  if (workers != 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

void LossModel::validate() const {
  if (!(epsilon >= 0.0)) throw ParameterError("loss: epsilon must be >= 0");
  if (!(epsilon < 1.0)) throw DivergenceError("loss: epsilon must be < 1");
}

void FlowEnsemble::validate() const {
  if (flows.empty()) throw ParameterError("flows: ensemble is empty");
  for (const auto& f : flows) {
    if (!(f.lambda > 0.0)) throw ParameterError("flows: lambda must be positive");
    if (f.eta < 0) throw ParameterError("flows: eta must be nonnegative");
  }
}

double FlowEnsemble::total_lambda() const {
  double s = 0.0;
  for (const auto& f : flows) s += f.lambda;
  return s;
}

double FlowEnsemble::weighted_eta() const {
  double s = 0.0;
  for (const auto& f : flows) s += f.eta * f.lambda;
  return s;
}

double retrans_rate_linc(const CodingParams& params, const LossModel& loss) {
  params.validate();
  loss.validate();
  const double eps = loss.epsilon;
  if (eps == 0.0) return 0.0;

  const int n = params.n;
  const int k = params.k;
  const int m = n - k;
  const double log_eps = std::log(eps);
  const double log_keep = std::log1p(-eps);

  double total = 0.0;
  for (int q = m + 1; q <= n; ++q) {
    const double log_p = q * log_eps + (n - q) * log_keep;
    double inner = 0.0;
    for (int c = std::max(1, q - m); c <= std::min(k, q); ++c)
      inner += c * std::exp(log_choose(k, c) + log_choose(m, q - c) + log_p);
    total += inner;
  }
  return std::clamp(total / k, 0.0, eps);
}

double retrans_rate_uncoded(const LossModel& loss) {
  loss.validate();
  return loss.epsilon;
}

double lambda_lossy(const FlowEnsemble& flows, const CodingParams& params, double r) {
  flows.validate();
  params.validate();
  check_ratio(r, "lambda_lossy");
  return static_cast<double>(params.n) * flows.total_lambda() / (params.k * (1.0 - r));
}

double lambda_nonlossy(const FlowEnsemble& flows, double r) {
  flows.validate();
  check_ratio(r, "lambda_nonlossy");
  return flows.weighted_eta() / (1.0 - r);
}

ModelReport goodput_ratio(const FlowEnsemble& flows, const CodingParams& params, const LossModel& loss) {
  flows.validate();
  params.validate();
  loss.validate();

  ModelReport rep;
  rep.r_nonc = retrans_rate_uncoded(loss);
  // n == k sends exactly what the uncoded system sends.
  const bool coded_link = params.coding_enabled();
  rep.r_linc = coded_link ? retrans_rate_linc(params, loss) : rep.r_nonc;
  rep.lambda_linc = lambda_lossy(flows, coded_link ? params : CodingParams{1, 1}, rep.r_linc);
  rep.lambda_linc_prime = lambda_nonlossy(flows, rep.r_linc);
  rep.lambda_nonc = lambda_lossy(flows, CodingParams{1, 1}, rep.r_nonc);
  rep.lambda_nonc_prime = lambda_nonlossy(flows, rep.r_nonc);

  // Useful work: every original packet crosses its eta non-lossy links and the lossy one.
  double useful = 0.0;
  double coded = 0.0;
  for (const auto& f : flows.flows) {
    useful += f.lambda * (f.eta + 1.0);
    coded += f.lambda * (f.eta + params.rate());
  }
  rep.g_linc = useful / rep.aggregate_linc();
  rep.g_nonc = useful / rep.aggregate_nonc();
  rep.delta = rep.aggregate_nonc() / rep.aggregate_linc();
  rep.delta_factored = (1.0 - rep.r_linc) / (1.0 - rep.r_nonc) * useful / coded;

  if (std::abs(rep.delta - rep.delta_factored) > 1e-9 * std::max(1.0, std::abs(rep.delta)))
    throw std::logic_error("goodput_ratio: delta forms disagree");
  return rep;
}

std::vector<DeltaSurfacePoint> delta_surface(const FlowEnsemble& flows, const LossModel& loss, int k_max,
                                             int n_max, unsigned workers) {
  flows.validate();
  loss.validate();
  if (k_max < 1 || n_max < k_max || n_max > CodingParams::kMaxN)
    throw ParameterError("optimize: need 1 <= k_max <= n_max <= 255");

  auto row = [&](int k) {
    std::vector<DeltaSurfacePoint> out;
    for (int n = k; n <= n_max; ++n) out.push_back({k, n, goodput_ratio(flows, {k, n}, loss).delta});
    return out;
  };

  const unsigned nthreads = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(k_max));
  std::vector<std::vector<DeltaSurfacePoint>> rows(k_max);
  std::vector<std::future<void>> jobs;
  for (unsigned t = 0; t < nthreads; ++t) {
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (int k = 1 + static_cast<int>(t); k <= k_max; k += static_cast<int>(nthreads)) rows[k - 1] = row(k);
    }));
  }
  for (auto& j : jobs) j.get();

  std::vector<DeltaSurfacePoint> surface;
  for (auto& r : rows) surface.insert(surface.end(), r.begin(), r.end());
  return surface;
}

OptimizeResult optimize_params(const FlowEnsemble& flows, const LossModel& loss, int k_max, int n_max,
                               unsigned workers) {
  const auto surface = delta_surface(flows, loss, k_max, n_max, workers);
  if (surface.empty()) throw ParameterError("optimize: empty grid");

  double best = surface.front().delta;
  for (const auto& p : surface) best = std::max(best, p.delta);
  // Surface is ordered by (k, n), so the first point within tolerance is the smallest.
  for (const auto& p : surface)
    if (p.delta >= best - kDeltaTieTolerance * std::abs(best)) return {p.k, p.n, p.delta};
  return {surface.front().k, surface.front().n, surface.front().delta};
}

}  // namespace linc
