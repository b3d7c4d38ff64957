#pragma once

/// @file
/// @brief Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
///
/// Solves
///   min_z  1/2 z^T G z + a^T z   s.t.  C z >= b
/// for symmetric positive definite G. The method starts from the
/// unconstrained minimizer and adds violated constraints one at a time while
/// keeping the multipliers of the active set dual feasible, so it terminates
/// in finitely many steps or proves infeasibility. Intended for the small
/// problems arising in pointwise controllers (tens of variables at most);
/// active-set quantities are recomputed from scratch at every step.

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace indistack {

enum class QPStatus
{
  optimal,
  max_iter,
  infeasible,
};

inline const char* to_string(QPStatus s)
{
  switch (s) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::max_iter: return "max_iter";
    case QPStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

struct QPProblem
{
  Matrix hessian;     ///< G (d x d), symmetric positive definite
  Vector linear;      ///< a (d)
  Matrix constraints; ///< C (r x d)
  Vector lower;       ///< b (r)
};

struct QPResult
{
  Vector z;
  Vector multipliers; ///< one per constraint row, zero for inactive rows
  QPStatus status = QPStatus::max_iter;
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = std::numeric_limits<double>::infinity();
};

inline double qp_objective(const QPProblem& qp, const Vector& z)
{
  return 0.5 * z.dot(qp.hessian * z) + qp.linear.dot(z);
}

/// Largest of the stationarity, primal feasibility, dual feasibility and
/// complementary slackness residuals, each divided by max(1, magnitude of
/// the terms it compares).
inline double kkt_residual(const QPProblem& qp, const Vector& z, const Vector& mult)
{
  const Vector gz = qp.hessian * z;
  const Vector cm = qp.constraints.transpose() * mult;
  const double stat_scale = std::max({1.0, gz.lpNorm<Eigen::Infinity>(), qp.linear.lpNorm<Eigen::Infinity>(),
                                      cm.lpNorm<Eigen::Infinity>()});
  double res = (gz + qp.linear - cm).lpNorm<Eigen::Infinity>() / stat_scale;
  for (Eigen::Index j = 0; j < qp.constraints.rows(); ++j) {
    const double row_scale = std::max({1.0, qp.constraints.row(j).lpNorm<Eigen::Infinity>() * z.lpNorm<Eigen::Infinity>(),
                                       std::abs(qp.lower(j))});
    const double slack = (qp.constraints.row(j).dot(z) - qp.lower(j)) / row_scale;
    const double mult_scale = std::max(1.0, mult.lpNorm<Eigen::Infinity>());
    res = std::max({res, -slack, -mult(j) / mult_scale, std::abs(mult(j) / mult_scale * slack)});
  }
  return res;
}

inline QPResult solve_qp(const QPProblem& qp, double tol = 1e-8, int max_iter = 10000)
{
  const Eigen::Index d = qp.hessian.rows();
  const Eigen::Index rows = qp.constraints.rows();
  if (qp.hessian.cols() != d || qp.linear.size() != d) throw ShapeError("qp: hessian / linear term shape mismatch");
  if (rows > 0 && qp.constraints.cols() != d) throw ShapeError("qp: constraint matrix has wrong width");
  if (qp.lower.size() != rows) throw ShapeError("qp: constraint bound vector has wrong length");
  if (!(tol > 0.0)) throw ConfigError("qp: tolerance must be positive");

  Eigen::LLT<Matrix> llt(qp.hessian);
  if (llt.info() != Eigen::Success) throw NumericalError("qp: hessian is not positive definite");
  const Matrix ginv = llt.solve(Matrix::Identity(d, d));

  QPResult result;
  result.z = -ginv * qp.linear;
  result.multipliers = Vector::Zero(rows);

  std::vector<Eigen::Index> active;
  std::vector<double> mu; // multipliers of `active`
  constexpr double tiny = 1e-14;

  auto finish = [&](QPStatus status) {
    result.status = status;
    for (std::size_t i = 0; i < active.size(); ++i) result.multipliers(active[i]) = mu[i];
    result.objective = qp_objective(qp, result.z);
    result.kkt_residual = kkt_residual(qp, result.z, result.multipliers);
    if (status == QPStatus::optimal && !(result.kkt_residual < tol)) result.status = QPStatus::max_iter;
    return result;
  };

  while (true) {
    // Most violated inactive constraint.
    Eigen::Index p = -1;
    double worst = -tol;
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (std::find(active.begin(), active.end(), j) != active.end()) continue;
      const double scale = std::max(1.0, qp.constraints.row(j).lpNorm<Eigen::Infinity>());
      const double s = (qp.constraints.row(j).dot(result.z) - qp.lower(j)) / scale;
      if (s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) return finish(QPStatus::optimal);

    const Vector np = qp.constraints.row(p).transpose();
    double mu_p = 0.0;
    while (true) {
      if (++result.iterations > max_iter) return finish(QPStatus::max_iter);

      const auto q = static_cast<Eigen::Index>(active.size());
      const Vector full = ginv * np;
      Vector step = full;
      Vector r = Vector::Zero(q);
      if (q > 0) {
        Matrix normals(d, q);
        for (Eigen::Index i = 0; i < q; ++i) normals.col(i) = qp.constraints.row(active[i]).transpose();
        const Matrix gn = ginv * normals;
        const Eigen::LDLT<Matrix> reduced(normals.transpose() * gn);
        r = reduced.solve(gn.transpose() * np);
        step = full - gn * r;
      }
      // A full-rank active set leaves no primal direction; round-off would
      // otherwise produce a tiny step and an enormous step length.
      const bool primal_step = q < d && step.lpNorm<Eigen::Infinity>() > 1e-10 * full.lpNorm<Eigen::Infinity>();

      // Partial (dual) step limit: first active multiplier to hit zero.
      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index i = 0; i < q; ++i) {
        if (r(i) > tiny) {
          const double ratio = mu[static_cast<std::size_t>(i)] / r(i);
          if (ratio < t1) {
            t1 = ratio;
            drop = i;
          }
        }
      }
      // Full (primal) step: makes constraint p active.
      const double curvature = step.dot(np);
      const double s_p = np.dot(result.z) - qp.lower(p);
      double t2 = std::numeric_limits<double>::infinity();
      if (primal_step && curvature > tiny) {
        t2 = -s_p / curvature;
      }
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return finish(QPStatus::infeasible);

      for (Eigen::Index i = 0; i < q; ++i) mu[static_cast<std::size_t>(i)] -= t * r(i);
      mu_p += t;
      if (std::isfinite(t2)) result.z += t * step;

      if (t2 <= t1) {
        active.push_back(p);
        mu.push_back(mu_p);
        break;
      }
      active.erase(active.begin() + drop);
      mu.erase(mu.begin() + drop);
    }
  }
}

} // namespace indistack
