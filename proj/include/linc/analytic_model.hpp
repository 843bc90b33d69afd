#pragma once

#include <vector>

#include "linc/erasure_coder.hpp"

namespace linc {

/// Independent per-packet erasure probability on the single lossy link.
struct LossModel {
  double epsilon = 0.0;
  void validate() const;  // 0 <= epsilon < 1
};

struct FlowRate {
  double lambda = 0.0;  // packets/second
  int eta = 0;          // non-lossy links on the flow's path
};

/// Per-sender rates and non-lossy hop counts. Nonempty, lambda > 0, eta >= 0.
struct FlowEnsemble {
  std::vector<FlowRate> flows;

  void validate() const;
  double total_lambda() const;
  double weighted_eta() const;  // sum of eta_i * lambda_i
};

struct ModelReport {
  double r_linc = 0.0;
  double r_nonc = 0.0;
  double lambda_linc = 0.0;        // lossy link, with coding
  double lambda_linc_prime = 0.0;  // all non-lossy links, with coding
  double lambda_nonc = 0.0;
  double lambda_nonc_prime = 0.0;
  double g_linc = 0.0;
  double g_nonc = 0.0;
  double delta = 0.0;           // ratio of aggregate rates
  double delta_factored = 0.0;  // (1-R)/(1-eps) * sum lambda(eta+1) / sum lambda(eta+n/k)

  double aggregate_linc() const { return lambda_linc + lambda_linc_prime; }
  double aggregate_nonc() const { return lambda_nonc + lambda_nonc_prime; }
};

/// Expected fraction of transmissions over the lossy link that end up
/// retransmitted end to end: lost systematic packets of blocks with more
/// than n-k erasures, divided by k. Evaluates the double sum over the number
/// of losses q and lost systematic packets c in log space.
double retrans_rate_linc(const CodingParams& params, const LossModel& loss);

/// Without coding every loss is retransmitted: R = epsilon.
double retrans_rate_uncoded(const LossModel& loss);

/// Arrival rate on the lossy link, (n/k) * sum(lambda) / (1 - r).
double lambda_lossy(const FlowEnsemble& flows, const CodingParams& params, double r);

/// Arrival rate summed over all non-lossy links, sum(eta * lambda) / (1 - r).
double lambda_nonlossy(const FlowEnsemble& flows, double r);

/// Full report; both forms of delta are computed and must agree to 1e-9.
ModelReport goodput_ratio(const FlowEnsemble& flows, const CodingParams& params, const LossModel& loss);

struct OptimizeResult {
  int k = 0;
  int n = 0;
  double delta = 0.0;
};

/// Values of delta within this relative distance of the best are ties.
inline constexpr double kDeltaTieTolerance = 1e-12;

/// Exhaustive search over 1 <= k <= k_max, k <= n <= n_max. Among the
/// maximizers of delta (up to kDeltaTieTolerance) the lexicographically
/// smallest (k, n) wins. Grid rows are evaluated on `workers` threads.
OptimizeResult optimize_params(const FlowEnsemble& flows, const LossModel& loss, int k_max = 255,
                               int n_max = 255, unsigned workers = 0);

/// delta for every grid point, row-major by k then n (as visited by optimize_params).
struct DeltaSurfacePoint {
  int k;
  int n;
  double delta;
};
std::vector<DeltaSurfacePoint> delta_surface(const FlowEnsemble& flows, const LossModel& loss, int k_max,
                                             int n_max, unsigned workers = 0);

}  // namespace linc
