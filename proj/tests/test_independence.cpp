#include <indistack/independence.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace indistack;
using indistack::testing::LinearValue;
using indistack::testing::QuadraticValue;
using indistack::testing::row;
using indistack::testing::vec;

TEST(Independence, BasicVerdicts)
{
  EXPECT_TRUE(is_independent({row({1, 0}), row({0, 1})}));
  EXPECT_FALSE(is_independent({row({1, 0}), row({2, 0})}));
  // The zero row is dropped before the rank test.
  EXPECT_TRUE(is_independent({row({1, 0}), row({0, 0})}));
  EXPECT_TRUE(is_independent({row({0, 0}), row({0, 0})}));
  // Three rows in the plane cannot be independent.
  EXPECT_FALSE(is_independent({row({1, 0}), row({0, 1}), row({1, 1})}));
  EXPECT_THROW(is_independent({}), ConfigError);
  EXPECT_THROW(is_independent({row({1, 0}), row({1, 0, 0})}), ShapeError);
}

TEST(Independence, PermutationAndScaleInvariance)
{
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RowVector> rows;
    const int k = 1 + trial % 3;
    for (int i = 0; i < k; ++i) rows.push_back(RowVector::NullaryExpr(3, [&](Eigen::Index) { return normal(rng); }));
    // Every third trial gets a dependent row.
    if (trial % 3 == 2) rows.back() = 0.5 * rows[0] - 2.0 * rows[1];
    const bool verdict = is_independent(rows);
    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(is_independent(shuffled), verdict);
    for (auto& r : shuffled) r *= (normal(rng) < 0 ? -1.0 : 1.0) * scale(rng);
    EXPECT_EQ(is_independent(shuffled), verdict);
  }
}

TEST(Independence, OutOfSpanComponentDecidesIndependence)
{
  const RowVector p1 = row({1, 0, 0});
  const RowVector p2 = row({0.3, 1, 0});
  const RowVector combo = 2.0 * p1 - 0.7 * p2;
  EXPECT_FALSE(is_independent({p1, p2, combo}));
  EXPECT_TRUE(is_independent({p1, p2, RowVector(combo + row({0, 0, 1e-3}))}));
}

TEST(Independence, OrthogonalityResidual)
{
  EXPECT_DOUBLE_EQ(orthogonality_residual(row({0, 1}), {row({1, 0}), row({-3, 0})}), 0.0);
  EXPECT_DOUBLE_EQ(orthogonality_residual(row({1, 2}), {row({1, 2})}), 1.0);
  EXPECT_DOUBLE_EQ(orthogonality_residual(row({0, 0}), {row({1, 2})}), 0.0);
  const RowVector a = row({1, 2});
  const RowVector b = row({-3, 0.5});
  EXPECT_DOUBLE_EQ(orthogonality_residual(a, {b}), orthogonality_residual(b, {a}));
  const double r = orthogonality_residual(a, {b});
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 1.0);
}

TEST(Independence, PolicyGapWithoutPriorsIsZero)
{
  const auto sys = ControlAffineSystem::integrator(2);
  const QuadraticValue j(Matrix::Identity(2, 2), vec({0.2, -0.1}));
  EXPECT_EQ(prop3_policy_gap(j, {}, sys, vec({0.4, 1.5})), 0.0);
}

TEST(Independence, PolicyGapForOrthogonalGradients)
{
  const auto sys = ControlAffineSystem::integrator(2);
  const LinearValue candidate(vec({0.0, 2.0}));
  std::vector<std::shared_ptr<const ValueFunction>> priors{std::make_shared<LinearValue>(vec({3.0, 0.0}))};
  EXPECT_LT(prop3_policy_gap(candidate, priors, sys, vec({0.1, 0.2})), 1e-9);
}

TEST(Independence, PolicyGapForParallelGradients)
{
  // g = [1, 0] with an identical prior: u* = -(I + g g^T)^-1 g / 2 = -1/4 e0,
  // while -g/2 = -1/2 e0.
  const auto sys = ControlAffineSystem::integrator(2);
  const LinearValue candidate(vec({1.0, 0.0}));
  std::vector<std::shared_ptr<const ValueFunction>> priors{std::make_shared<LinearValue>(vec({1.0, 0.0}))};
  EXPECT_NEAR(prop3_policy_gap(candidate, priors, sys, vec({0.0, 0.0})), 0.25, 1e-15);
}

TEST(Independence, ReportOnSingleNet)
{
  const auto sys = ControlAffineSystem::integrator(2);
  std::vector<std::shared_ptr<const ValueFunction>> nets{std::make_shared<LinearValue>(vec({1.0, -1.0}))};
  ReportOptions opt;
  opt.samples = 500;
  const IndependenceReport rep = report(nets, sys, Box::cube(2, -1, 1), opt);
  EXPECT_EQ(rep.samples, 500);
  EXPECT_DOUBLE_EQ(rep.fraction_independent, 1.0);
  EXPECT_EQ(rep.active_states, 500);
  EXPECT_EQ(rep.cosine_pairs, 0);
}

TEST(Independence, ReportOnDuplicatedNet)
{
  const auto sys = ControlAffineSystem::integrator(2);
  auto net = std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), vec({0.5, 0.5}));
  ReportOptions opt;
  opt.samples = 1000;
  const IndependenceReport rep = report({net, net}, sys, Box::cube(2, -1, 1), opt);
  EXPECT_LT(rep.fraction_independent, 0.01);
  EXPECT_NEAR(rep.mean_abs_cosine, 1.0, 1e-12);
  EXPECT_LT(rep.min_gram_det, 1e-12);
  EXPECT_EQ(rep.failures.size(), opt.max_failures);
}

TEST(Independence, ReportOnOrthogonalPair)
{
  const auto sys = ControlAffineSystem::integrator(2);
  std::vector<std::shared_ptr<const ValueFunction>> nets{std::make_shared<LinearValue>(vec({1.0, 0.0})),
                                                         std::make_shared<LinearValue>(vec({0.0, -2.0}))};
  ReportOptions opt;
  opt.samples = 200;
  const IndependenceReport rep = report(nets, sys, Box::cube(2, -1, 1), opt);
  EXPECT_DOUBLE_EQ(rep.fraction_independent, 1.0);
  EXPECT_DOUBLE_EQ(rep.fraction_independent_active, 1.0);
  EXPECT_DOUBLE_EQ(rep.max_abs_cosine, 0.0);
  EXPECT_NEAR(rep.min_gram_det, 1.0, 1e-12);
  EXPECT_TRUE(rep.failures.empty());
}

TEST(Independence, ReportIsDeterministicPerSeed)
{
  const auto sys = ControlAffineSystem::integrator(2);
  std::vector<std::shared_ptr<const ValueFunction>> nets{
    std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), vec({0.0, 0.0})),
    std::make_shared<QuadraticValue>(2.0 * Matrix::Identity(2, 2), vec({1.0, 0.0}))};
  ReportOptions opt;
  opt.samples = 300;
  opt.seed = 11;
  const auto a = report(nets, sys, Box::cube(2, -1, 1), opt);
  const auto b = report(nets, sys, Box::cube(2, -1, 1), opt);
  EXPECT_EQ(a.mean_abs_cosine, b.mean_abs_cosine);
  EXPECT_EQ(a.fraction_independent, b.fraction_independent);
  opt.seed = 12;
  const auto c = report(nets, sys, Box::cube(2, -1, 1), opt);
  EXPECT_NE(a.mean_abs_cosine, c.mean_abs_cosine);
}

TEST(Independence, ReportValidation)
{
  const auto sys = ControlAffineSystem::integrator(2);
  std::vector<std::shared_ptr<const ValueFunction>> nets{std::make_shared<LinearValue>(vec({1.0, 0.0}))};
  EXPECT_THROW(report({}, sys, Box::cube(2, -1, 1)), ConfigError);
  ReportOptions opt;
  opt.samples = 0;
  EXPECT_THROW(report(nets, sys, Box::cube(2, -1, 1), opt), ConfigError);
  EXPECT_THROW(report(nets, sys, Box::cube(3, -1, 1)), ShapeError);
  std::vector<std::shared_ptr<const ValueFunction>> wrong{std::make_shared<LinearValue>(vec({1.0, 0.0, 0.0}))};
  EXPECT_THROW(report(wrong, sys, Box::cube(2, -1, 1)), ShapeError);
}
