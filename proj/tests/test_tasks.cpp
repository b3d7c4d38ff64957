#include <indistack/tasks.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <memory>

using namespace indistack;
using indistack::testing::LinearValue;
using indistack::testing::QuadraticValue;
using indistack::testing::row;
using indistack::testing::vec;

TEST(StateCost, AvoidCountsRobotsInsideWithClosedBoundary)
{
  const StateCost c = StateCost::avoid({Rect::centered(0, 0, 1)}, 35.0);
  EXPECT_DOUBLE_EQ(eval_state_cost(c, vec({0, 0, 2, 2, 0.5, 0.5})), 70.0);
  EXPECT_DOUBLE_EQ(eval_state_cost(c, vec({0.51, 0, 2, 2, -3, 0})), 0.0);
}

TEST(StateCost, AvoidCountsOncePerRobotAcrossOverlappingRegions)
{
  const StateCost c = StateCost::avoid({Rect::centered(0, 0, 1), Rect::centered(0.2, 0, 1)}, 25.0);
  EXPECT_DOUBLE_EQ(eval_state_cost(c, vec({0.1, 0.0})), 25.0);
}

TEST(StateCost, GoToPointIsGainTimesDistance)
{
  const StateCost c = StateCost::go_to(vec({-2, 0}), 5.0);
  EXPECT_NEAR(eval_state_cost(c, vec({1, 4})), 25.0, 1e-12);
  EXPECT_DOUBLE_EQ(eval_state_cost(c, vec({-2, 0})), 0.0);
}

TEST(StateCost, FormationZeroOnEquilateralTriangle)
{
  const double s = 0.75;
  const StateCost c = StateCost::formation_shape(s, 1.5);
  const Vector tri = vec({0, 0, s, 0, s / 2, s * std::sqrt(3.0) / 2});
  EXPECT_NEAR(eval_state_cost(c, tri), 0.0, 1e-12);
  // Collapsed formation: every side has error s.
  EXPECT_NEAR(eval_state_cost(c, Vector::Zero(6)), 1.5 * 3 * s, 1e-12);
}

TEST(StateCost, RobotSubsetsRestrictTheCost)
{
  StateCost c = StateCost::go_to(vec({0, 0}), 1.0);
  c.robots = {1};
  EXPECT_NEAR(eval_state_cost(c, vec({3, 4, 0, 1})), 1.0, 1e-12);
  c.robots = {2};
  EXPECT_THROW(eval_state_cost(c, vec({3, 4, 0, 1})), ShapeError);
}

TEST(InputMetric, IdentityWithoutPenalties)
{
  const auto sys = ControlAffineSystem::integrator(3);
  EXPECT_EQ(input_metric_at({}, sys, vec({1, 2, 3})), Matrix::Identity(3, 3));
}

TEST(InputMetric, RankOneTermsAddUp)
{
  const auto sys = ControlAffineSystem::integrator(2);
  InputMetric metric;
  metric.penalties.push_back({std::make_shared<LinearValue>(vec({1, 0})), 4.0, 0.0});
  metric.penalties.push_back({std::make_shared<LinearValue>(vec({1, 1})), 2.0, 0.0});
  Matrix expected(2, 2);
  expected << 1 + 4 + 2, 2, 2, 1 + 2;
  EXPECT_LT((input_metric_at(metric, sys, vec({0.3, 0.1})) - expected).norm(), 1e-14);
}

TEST(InputMetric, ClampBoundsThePenaltyGradient)
{
  const auto sys = ControlAffineSystem::integrator(2);
  InputMetric metric;
  metric.penalties.push_back({std::make_shared<LinearValue>(vec({30, 40})), 1.0, 10.0});
  const Matrix r = input_metric_at(metric, sys, vec({0, 0}));
  // (30, 40) rescaled to norm 10 is (6, 8).
  EXPECT_NEAR(r(0, 0), 1 + 36, 1e-12);
  EXPECT_NEAR(r(0, 1), 48, 1e-12);
  EXPECT_NEAR(r(1, 1), 1 + 64, 1e-12);
}

TEST(InputMetric, DeadzoneShrinksBeforeClamping)
{
  const auto sys = ControlAffineSystem::integrator(2);
  InputMetric metric;
  // |(3, 4)| = 5 shrinks to 4: (2.4, 3.2).
  metric.penalties.push_back({std::make_shared<LinearValue>(vec({3, 4})), 1.0, 10.0, 1.0});
  Matrix r = input_metric_at(metric, sys, vec({0, 0}));
  EXPECT_NEAR(r(0, 0), 1 + 2.4 * 2.4, 1e-12);
  EXPECT_NEAR(r(0, 1), 2.4 * 3.2, 1e-12);
  // Gradients inside the deadzone vanish entirely.
  metric.penalties[0].deadzone = 5.0;
  EXPECT_EQ(input_metric_at(metric, sys, vec({0, 0})), Matrix::Identity(2, 2));
  // (30, 40) shrinks to norm 49 and is then clamped to 10.
  metric.penalties[0] = {std::make_shared<LinearValue>(vec({30, 40})), 1.0, 10.0, 1.0};
  r = input_metric_at(metric, sys, vec({0, 0}));
  EXPECT_NEAR(r(1, 1), 1 + 64, 1e-12);
}

TEST(InputMetric, InstantaneousCost)
{
  Matrix r(2, 2);
  r << 2, 0, 0, 3;
  EXPECT_DOUBLE_EQ(instantaneous_cost(1.5, r, vec({1, 2})), 1.5 + 2 + 12);
}

TEST(Lifting, SumsOverAssignedRobotsAndZerosOthers)
{
  const auto team = ControlAffineSystem::single_integrator_team(3);
  const auto single = std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto lifted = lift_task(single, {0, 2}, team);
  const Vector x = vec({1, 0, 5, 5, 0, 2});
  EXPECT_DOUBLE_EQ(lifted->value(x), 1.0 + 4.0);
  const RowVector g = lifted->gradient(x);
  EXPECT_LT((g - row({2, 0, 0, 0, 0, 4})).norm(), 1e-14);
}

TEST(Lifting, BatchedMatchesSingleState)
{
  const auto team = ControlAffineSystem::single_integrator_team(2);
  const auto single = std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), vec({0.5, -1}));
  const auto lifted = lift_task(single, {0, 1}, team);
  Matrix states(4, 3);
  states << 1, 2, 3, 0, 1, 0, -1, 0, 2, 4, 0.5, 1;
  RowVector v;
  Matrix g;
  lifted->evaluate(states, v, &g);
  for (Eigen::Index b = 0; b < 3; ++b) {
    EXPECT_DOUBLE_EQ(v(b), lifted->value(states.col(b)));
    EXPECT_EQ(g.col(b).transpose(), lifted->gradient(states.col(b)));
  }
}

TEST(Lifting, RejectsEmptyOrInvalidAssignments)
{
  const auto team = ControlAffineSystem::single_integrator_team(2);
  const auto single = std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), Vector::Zero(2));
  EXPECT_THROW(lift_task(single, {}, team), ConfigError);
  EXPECT_THROW(lift_task(single, {2}, team), ConfigError);
  const auto wide = std::make_shared<QuadraticValue>(Matrix::Identity(3, 3), Vector::Zero(3));
  EXPECT_THROW(lift_task(wide, {0}, team), ShapeError);
}
