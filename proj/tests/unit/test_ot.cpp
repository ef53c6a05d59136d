#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "thermoloss/error.hpp"
#include "thermoloss/ot.hpp"

namespace thermoloss {
namespace {

using testing::brute_force_w2;
using testing::random_points;

TEST(ExactW2, IdenticalMeasuresHaveZeroCostAndIdentityPlan) {
  Rng rng(1);
  const auto pts = random_points(rng, 5, 3);
  const auto mu = EmpiricalMeasure::from_points(pts);
  const auto res = exact_w2_squared(mu, mu);
  EXPECT_EQ(res.cost, 0.0);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(res.assignment[k], k);
    EXPECT_DOUBLE_EQ(res.plan(k, k), 0.2);
  }
}

TEST(ExactW2, SinglePair) {
  const auto mu = EmpiricalMeasure::from_points({{0.0, 0.0}});
  const auto nu = EmpiricalMeasure::from_points({{3.0, 4.0}});
  EXPECT_DOUBLE_EQ(exact_w2_squared(mu, nu).cost, 25.0);
}

TEST(ExactW2, MatchesPermutationEnumeration) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const auto x = random_points(rng, n, 2);
    const auto y = random_points(rng, n, 2);
    const auto res = exact_w2_squared(EmpiricalMeasure::from_points(x),
                                      EmpiricalMeasure::from_points(y));
    EXPECT_NEAR(res.cost, brute_force_w2(x, y), 1e-12);
    EXPECT_LE(res.plan.max_marginal_violation(), 1e-15);
  }
}

TEST(ExactW2, TiesResolveToLowestIndexPermutation) {
  // Every permutation has the same cost: four corners of a square against
  // its centre replicated.
  const auto mu = EmpiricalMeasure::from_points({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto nu = EmpiricalMeasure::from_points(
      {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
  const auto res = exact_w2_squared(mu, nu);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(res.assignment[k], k);
  EXPECT_DOUBLE_EQ(res.cost, 0.5);
}

TEST(ExactW2, MetricProperties) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const auto a = EmpiricalMeasure::from_points(random_points(rng, n, 3));
    const auto b = EmpiricalMeasure::from_points(random_points(rng, n, 3));
    const auto c = EmpiricalMeasure::from_points(random_points(rng, n, 3));
    const double ab = exact_w2_squared(a, b).cost;
    EXPECT_NEAR(ab, exact_w2_squared(b, a).cost, 1e-14);
    EXPECT_GT(ab, 0.0);
    const double bc = exact_w2_squared(b, c).cost;
    const double ac = exact_w2_squared(a, c).cost;
    EXPECT_LE(std::sqrt(ac), std::sqrt(ab) + std::sqrt(bc) + 1e-9);
  }
}

TEST(ExactW2, ZeroForPermutedCopy) {
  const auto a = EmpiricalMeasure::from_points({{0.1, 0.2}, {0.9, 0.3}, {0.4, 0.7}});
  const auto b = EmpiricalMeasure::from_points({{0.4, 0.7}, {0.1, 0.2}, {0.9, 0.3}});
  EXPECT_EQ(exact_w2_squared(a, b).cost, 0.0);
}

TEST(ExactW2, Errors) {
  const auto a = EmpiricalMeasure::from_points({{0.0}, {1.0}});
  const auto b = EmpiricalMeasure::from_points({{0.0}});
  EXPECT_THROW(exact_w2_squared(a, b), Unsupported);
  EXPECT_THROW(exact_w2_squared(EmpiricalMeasure{}, b), InvalidArgument);
}

TEST(Sinkhorn, SingleAtomIsExact) {
  const auto mu = EmpiricalMeasure::from_points({{0.0, 0.0}});
  const auto nu = EmpiricalMeasure::from_points({{3.0, 4.0}});
  const auto res = sinkhorn(mu, nu);
  EXPECT_TRUE(res.converged);
  EXPECT_DOUBLE_EQ(res.plan(0, 0), 1.0);
  EXPECT_EQ(res.entropy, 0.0);
  EXPECT_DOUBLE_EQ(res.cost, 25.0);
}

TEST(Sinkhorn, IdenticalMeasuresBoundedByEntropy) {
  Rng rng(3);
  const SinkhornConfig cfg;
  for (std::size_t K : {2u, 4u, 8u}) {
    const auto mu = EmpiricalMeasure::from_points(random_points(rng, K, 2));
    const auto res = sinkhorn(mu, mu, cfg);
    EXPECT_TRUE(res.converged);
    EXPECT_LE(std::abs(res.cost),
              cfg.lambda_e * std::log(static_cast<double>(K)) + 10 * cfg.tolerance);
  }
}

TEST(Sinkhorn, MatchesExactOnRandomInstances) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = EmpiricalMeasure::from_points(random_points(rng, 4, 2));
    const auto y = EmpiricalMeasure::from_points(random_points(rng, 4, 2));
    const double exact = exact_w2_squared(x, y).cost;
    const auto res = sinkhorn(x, y);
    EXPECT_TRUE(res.converged);
    EXPECT_LE(std::abs(res.cost - exact) / exact, 1e-3);
    EXPECT_LE(res.plan.max_marginal_violation(), 1e-9);
  }
}

TEST(Sinkhorn, UnequalSizes) {
  Rng rng(9);
  const auto x = EmpiricalMeasure::from_points(random_points(rng, 3, 2));
  const auto y = EmpiricalMeasure::from_points(random_points(rng, 5, 2));
  const auto res = sinkhorn(x, y);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.plan.max_marginal_violation(), 1e-9);
}

TEST(Sinkhorn, TransportCostNonIncreasingAcrossStages) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = EmpiricalMeasure::from_points(random_points(rng, 5, 3));
    const auto y = EmpiricalMeasure::from_points(random_points(rng, 5, 3));
    const auto res = sinkhorn(x, y);
    ASSERT_GT(res.stages.size(), 2u);
    for (std::size_t s = 1; s < res.stages.size(); ++s) {
      EXPECT_LE(res.stages[s].transport_cost, res.stages[s - 1].transport_cost + 1e-9);
      // The regularized value rises toward the unregularized optimum as
      // epsilon shrinks, because sum pi log pi is negative.
      EXPECT_GE(res.stages[s].cost, res.stages[s - 1].cost - 1e-9);
    }
  }
}

TEST(Sinkhorn, TranslationCovariance) {
  Rng rng(17);
  const auto x = EmpiricalMeasure::from_points(random_points(rng, 4, 2));
  const auto y = EmpiricalMeasure::from_points(random_points(rng, 4, 2));
  const std::vector<double> shift{0.37, -1.25};
  const auto xs = x.translated(shift), ys = y.translated(shift);
  EXPECT_NEAR(sinkhorn(x, y).cost, sinkhorn(xs, ys).cost, 1e-9);
  EXPECT_NEAR(exact_w2_squared(x, y).cost, exact_w2_squared(xs, ys).cost, 1e-9);
}

TEST(Sinkhorn, NonConvergenceIsFlagged) {
  Rng rng(19);
  const auto x = EmpiricalMeasure::from_points(random_points(rng, 6, 2));
  const auto y = EmpiricalMeasure::from_points(random_points(rng, 6, 2));
  SinkhornConfig cfg;
  cfg.max_iters = 1;
  cfg.anneal = false;
  cfg.lambda_e = 1e-2;
  cfg.tolerance = 1e-15;
  const auto res = sinkhorn(x, y, cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_GT(res.max_violation, cfg.tolerance);
}

TEST(SinkhornGrad, ZeroForMatchedMeasures) {
  Rng rng(23);
  const auto x = EmpiricalMeasure::from_points(random_points(rng, 4, 3));
  const auto res = sinkhorn(x, x);
  for (double g : sinkhorn_grad_source(x, x, res.plan)) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(SinkhornGrad, SingleAtom) {
  const auto mu = EmpiricalMeasure::from_points({{0.0, 0.0}});
  const auto nu = EmpiricalMeasure::from_points({{3.0, 4.0}});
  const auto g = sinkhorn_grad_source(mu, nu, sinkhorn(mu, nu).plan);
  EXPECT_DOUBLE_EQ(g[0], -6.0);
  EXPECT_DOUBLE_EQ(g[1], -8.0);
}

TEST(SinkhornGrad, MatchesFiniteDifferences) {
  Rng rng(29);
  const auto xs = random_points(rng, 3, 2);
  const auto y = EmpiricalMeasure::from_points(random_points(rng, 3, 2));
  std::vector<double> flat;
  for (const auto& p : xs) flat.insert(flat.end(), p.begin(), p.end());
  const auto value = [&](const std::vector<double>& c) {
    return sinkhorn(EmpiricalMeasure(2, c), y).cost;
  };
  const auto mu = EmpiricalMeasure(2, flat);
  const auto analytic = sinkhorn_grad_source(mu, y, sinkhorn(mu, y).plan);
  const auto numeric = testing::central_differences(value, flat, 1e-5);
  EXPECT_LE(testing::max_relative_error(analytic, numeric), 1e-3);
}

TEST(SinkhornGrad, DimensionMismatch) {
  const auto mu = EmpiricalMeasure::from_points({{0.0, 0.0}});
  const auto nu = EmpiricalMeasure::from_points({{3.0, 4.0}, {1.0, 1.0}});
  TransportPlan bad{1, 1, {1.0}};
  EXPECT_THROW(sinkhorn_grad_source(mu, nu, bad), DimensionMismatch);
}

}  // namespace
}  // namespace thermoloss
