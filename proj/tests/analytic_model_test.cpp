#include "linc/analytic_model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "linc/error.hpp"
#include "linc/topology.hpp"
#include "oracles.hpp"

namespace linc {
namespace {

FlowEnsemble scenario1_ensemble() {
  const auto sc = builtin_scenario1(1);
  return to_ensemble(normalize_load(sc.topology, route(sc.topology, sc.flows), 0.5));
}

TEST(RetransRate, NoParityEqualsEpsilon) {
  for (int k : {1, 10, 50})
    for (double eps : {0.01, 0.05, 0.1, 0.2}) EXPECT_NEAR(retrans_rate_linc({k, k}, {eps}), eps, 1e-12);
}

TEST(RetransRate, ZeroLoss) {
  EXPECT_EQ(retrans_rate_linc({5, 7}, {0.0}), 0.0);
  EXPECT_EQ(retrans_rate_linc({50, 50}, {0.0}), 0.0);
}

TEST(RetransRate, RepetitionPair) { EXPECT_NEAR(retrans_rate_linc({1, 2}, {0.1}), 0.01, 1e-15); }

TEST(RetransRate, MatchesEnumeration) {
  for (int n = 1; n <= 12; ++n)
    for (int k = 1; k <= n; ++k)
      for (double eps : {0.01, 0.1, 0.3, 0.7})
        ASSERT_NEAR(retrans_rate_linc({k, n}, {eps}), oracle::retrans_enumerate(k, n, eps), 1e-13)
            << k << "," << n << "," << eps;
}

TEST(RetransRate, MatchesClosedForm) {
  for (int k : {1, 2, 10, 50, 120, 200})
    for (int n = k; n <= std::min(255, k + 60); n += 3)
      for (double eps : {1e-4, 0.05, 0.1, 0.5, 0.9})
        ASSERT_NEAR(retrans_rate_linc({k, n}, {eps}), oracle::retrans_closed_form(k, n, eps),
                    1e-12 + 1e-9 * oracle::retrans_closed_form(k, n, eps))
            << k << "," << n << "," << eps;
}

TEST(RetransRate, MonteCarloFiveOfSeven) {
  const auto mc = oracle::retrans_monte_carlo(5, 7, 0.1, 1'000'000, 17);
  EXPECT_NEAR(retrans_rate_linc({5, 7}, {0.1}), mc.mean, 3 * mc.stderr_);
}

TEST(RetransRate, BoundsAndMonotone) {
  for (double eps : {0.01, 0.05, 0.1, 0.4}) {
    double prev = eps;
    for (int n = 50; n <= 255; ++n) {
      const double r = retrans_rate_linc({50, n}, {eps});
      ASSERT_GE(r, 0.0);
      ASSERT_LE(r, prev + 1e-15);
      prev = r;
    }
  }
}

TEST(RetransRate, Divergence) {
  EXPECT_THROW(retrans_rate_linc({5, 7}, {1.0}), DivergenceError);
  EXPECT_THROW(retrans_rate_linc({5, 7}, {-0.1}), ParameterError);
  EXPECT_THROW(retrans_rate_linc({5, 4}, {0.1}), ParameterError);
}

TEST(RetransRate, Uncoded) {
  EXPECT_EQ(retrans_rate_uncoded({0.0}), 0.0);
  EXPECT_EQ(retrans_rate_uncoded({0.05}), 0.05);
  EXPECT_EQ(retrans_rate_uncoded({0.1}), 0.1);
}

TEST(Rates, Lossy) {
  const FlowEnsemble f{{{60, 3}, {40, 1}}};
  EXPECT_DOUBLE_EQ(lambda_lossy(f, {10, 10}, 0.0), 100.0);
  EXPECT_DOUBLE_EQ(lambda_lossy(f, {10, 12}, 0.0), 120.0);
  EXPECT_NEAR(lambda_lossy(f, {10, 10}, 0.05), 105.263157894737, 1e-9);
  EXPECT_THROW(lambda_lossy(f, {10, 10}, 1.0), DivergenceError);
}

TEST(Rates, NonLossy) {
  EXPECT_DOUBLE_EQ(lambda_nonlossy({{{50, 4}, {50, 4}}}, 0.0), 400.0);
  EXPECT_EQ(lambda_nonlossy({{{10, 0}}}, 0.5), 0.0);
  const FlowEnsemble f{{{5, 2}, {7, 9}}};
  double prev = 0.0;
  for (double r = 0.0; r < 0.99; r += 0.05) {
    const double v = lambda_nonlossy(f, r);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Ensemble, Validation) {
  EXPECT_THROW(FlowEnsemble{}.validate(), ParameterError);
  EXPECT_THROW((FlowEnsemble{{{0.0, 1}}}.validate()), ParameterError);
  EXPECT_THROW((FlowEnsemble{{{1.0, -1}}}.validate()), ParameterError);
}

TEST(GoodputRatio, NoCodingIsOne) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto f = oracle::random_ensemble(rng);
    EXPECT_EQ(goodput_ratio(f, {50, 50}, {0.07}).delta, 1.0);
  }
}

TEST(GoodputRatio, OverheadWithoutLoss) {
  const FlowEnsemble f{{{1, 4}, {2, 4}}};
  const auto rep = goodput_ratio(f, {50, 60}, {0.0});
  EXPECT_NEAR(rep.delta, 15.0 / 15.6, 1e-15);
  EXPECT_LT(rep.delta, 1.0);
}

TEST(GoodputRatio, FormsAgree) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> kd(1, 200);
  std::uniform_real_distribution<double> ed(0.0, 0.5);
  for (int i = 0; i < 100; ++i) {
    const auto f = oracle::random_ensemble(rng);
    const int k = kd(rng);
    const int n = std::min(255, k + static_cast<int>(rng() % 60));
    const auto rep = goodput_ratio(f, {k, n}, {ed(rng)});
    ASSERT_NEAR(rep.delta, rep.delta_factored, 1e-12 * rep.delta);
  }
}

TEST(GoodputRatio, MatchesNaive) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto f = oracle::random_ensemble(rng);
    for (auto [k, n] : {std::pair{5, 7}, {50, 60}, {20, 20}}) {
      const double d = goodput_ratio(f, {k, n}, {0.1}).delta;
      ASSERT_NEAR(d, oracle::delta_naive(f, k, n, 0.1), 1e-12 * d);
    }
  }
}

TEST(GoodputRatio, Scenario1Report) {
  const auto f = scenario1_ensemble();
  const auto rep = goodput_ratio(f, {50, 50}, {0.05});
  EXPECT_NEAR(rep.r_linc, 0.05, 1e-12);
  EXPECT_EQ(rep.r_nonc, 0.05);
  EXPECT_NEAR(rep.lambda_nonc_prime, 4 * rep.lambda_nonc, 1e-6);
  EXPECT_NEAR(rep.g_linc, 0.95, 1e-12);
}

TEST(GoodputRatio, Scenario1PeakNearRegimeBoundary) {
  const auto f = scenario1_ensemble();
  int best_n = 50;
  double best = 0.0;
  for (int n = 50; n <= 70; ++n) {
    const double d = goodput_ratio(f, {50, n}, {0.1}).delta;
    if (d > best) best = d, best_n = n;
  }
  const double rate = best_n / 50.0;
  EXPECT_GE(rate, 1.14);
  EXPECT_LE(rate, 1.22);
}

TEST(Optimizer, NoLossPicksUncoded) {
  const FlowEnsemble f{{{3, 4}, {1, 2}}};
  const auto r = optimize_params(f, {0.0}, 30, 40);
  EXPECT_EQ(r.n, r.k);
  EXPECT_EQ(r.k, 1);
  EXPECT_EQ(r.delta, 1.0);
}

TEST(Optimizer, GridOfOne) {
  const FlowEnsemble f{{{3, 4}}};
  const auto r = optimize_params(f, {0.2}, 1, 1);
  EXPECT_EQ(r.k, 1);
  EXPECT_EQ(r.n, 1);
  EXPECT_EQ(r.delta, 1.0);
}

TEST(Optimizer, Scenario1MatchesBruteForce) {
  const auto f = scenario1_ensemble();
  const auto got = optimize_params(f, {0.1}, 80, 80);
  const auto want = oracle::brute_force_argmax(f, 0.1, 80, 80);
  EXPECT_EQ(got.k, want.k);
  EXPECT_EQ(got.n, want.n);
  EXPECT_EQ(got.delta, want.delta);
  EXPECT_NEAR(got.delta, oracle::delta_naive(f, got.k, got.n, 0.1), 1e-12);
}

TEST(Optimizer, WorkerCountIrrelevant) {
  std::mt19937_64 rng(12);
  const auto f = oracle::random_ensemble(rng);
  const auto a = optimize_params(f, {0.08}, 60, 90, 1);
  const auto b = optimize_params(f, {0.08}, 60, 90, 7);
  EXPECT_EQ(a.k, b.k);
  EXPECT_EQ(a.n, b.n);
  EXPECT_EQ(a.delta, b.delta);
}

TEST(Optimizer, SurfaceArgmaxIsOptimum) {
  const auto f = scenario1_ensemble();
  const auto s = delta_surface(f, {0.05}, 40, 60);
  const auto r = optimize_params(f, {0.05}, 40, 60);
  double best = 0.0;
  for (const auto& p : s) best = std::max(best, p.delta);
  EXPECT_EQ(r.delta, best);
  EXPECT_EQ(s.front().k, 1);
  EXPECT_EQ(s.front().n, 1);
  EXPECT_EQ(s.size(), static_cast<std::size_t>(40 * 60 - 40 * 39 / 2));
}

TEST(Optimizer, BadGrid) {
  const FlowEnsemble f{{{3, 4}}};
  EXPECT_THROW(optimize_params(f, {0.1}, 0, 5), ParameterError);
  EXPECT_THROW(optimize_params(f, {0.1}, 5, 300), ParameterError);
}

}  // namespace
}  // namespace linc
