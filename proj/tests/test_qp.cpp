#include <indistack/qp.hpp>

#include "qp_oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace indistack;
using indistack::testing::enumerate_qp;
using indistack::testing::vec;

TEST(QP, UnconstrainedMinimizer)
{
  QPProblem qp{2.0 * Matrix::Identity(2, 2), vec({-2.0, 4.0}), Matrix::Zero(0, 2), Vector::Zero(0)};
  const QPResult r = solve_qp(qp);
  EXPECT_EQ(r.status, QPStatus::optimal);
  EXPECT_NEAR(r.z(0), 1.0, 1e-14);
  EXPECT_NEAR(r.z(1), -2.0, 1e-14);
}

TEST(QP, SingleActiveConstraint)
{
  // min |z|^2 s.t. z0 + z1 >= 2 -> z = (1, 1), multiplier 2.
  Matrix c(1, 2);
  c << 1.0, 1.0;
  QPProblem qp{2.0 * Matrix::Identity(2, 2), Vector::Zero(2), c, vec({2.0})};
  const QPResult r = solve_qp(qp);
  EXPECT_EQ(r.status, QPStatus::optimal);
  EXPECT_NEAR(r.z(0), 1.0, 1e-12);
  EXPECT_NEAR(r.z(1), 1.0, 1e-12);
  EXPECT_NEAR(r.multipliers(0), 2.0, 1e-12);
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
  EXPECT_LT(r.kkt_residual, 1e-10);
}

TEST(QP, DetectsInfeasibility)
{
  // z >= 1 and -z >= 0 cannot both hold.
  Matrix c(2, 1);
  c << 1.0, -1.0;
  QPProblem qp{Matrix::Identity(1, 1), Vector::Zero(1), c, vec({1.0, 0.0})};
  EXPECT_EQ(solve_qp(qp).status, QPStatus::infeasible);
}

TEST(QP, RejectsIndefiniteHessianAndBadShapes)
{
  QPProblem qp{-Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Zero(0, 2), Vector::Zero(0)};
  EXPECT_THROW(solve_qp(qp), NumericalError);
  QPProblem bad{Matrix::Identity(2, 2), Vector::Zero(3), Matrix::Zero(0, 2), Vector::Zero(0)};
  EXPECT_THROW(solve_qp(bad), ShapeError);
}

TEST(QP, IterationLimitIsReported)
{
  // Needs two additions: z1 >= 2 first, then z0 >= 1.
  Matrix c(2, 2);
  c << 1, 0, 0, 1;
  QPProblem qp{Matrix::Identity(2, 2), Vector::Zero(2), c, vec({1.0, 2.0})};
  EXPECT_EQ(solve_qp(qp, 1e-8, 1).status, QPStatus::max_iter);
  EXPECT_EQ(solve_qp(qp).status, QPStatus::optimal);
}

TEST(QP, MatchesEnumerationOnRandomProblems)
{
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 4);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = dim(rng);
    const int rows = dim(rng) + 2;
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    QPProblem qp;
    qp.hessian = a * a.transpose() + 0.1 * Matrix::Identity(d, d);
    qp.linear = Vector::NullaryExpr(d, [&](Eigen::Index) { return normal(rng); });
    qp.constraints = Matrix::NullaryExpr(rows, d, [&](Eigen::Index, Eigen::Index) { return normal(rng); });
    qp.lower = Vector::NullaryExpr(rows, [&](Eigen::Index) { return normal(rng); });
    const auto oracle = enumerate_qp(qp);
    const QPResult r = solve_qp(qp);
    if (!oracle) {
      EXPECT_EQ(r.status, QPStatus::infeasible) << "trial " << trial;
      continue;
    }
    ++feasible;
    ASSERT_EQ(r.status, QPStatus::optimal) << "trial " << trial;
    EXPECT_NEAR(r.objective, oracle->objective, 1e-6 * std::max(1.0, std::abs(oracle->objective)))
      << "trial " << trial;
  }
  EXPECT_GT(feasible, 50);
}
