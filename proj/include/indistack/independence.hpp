#pragma once

/// @file
/// @brief Numerical checks of task independence and orthogonality.
///
/// Tasks are independent at x when the nonzero rows among LgJ_1(x), ...,
/// LgJ_N(x) are linearly independent, and orthogonal when those rows are
/// pairwise orthogonal.

#include "common.hpp"
#include "dynamics.hpp"
#include "tasks.hpp"
#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace indistack {

/// Rows whose norm is at least `tol` times the largest row norm.
inline std::vector<RowVector> nonzero_rows(const std::vector<RowVector>& rows, double tol)
{
  double max_norm = 0.0;
  for (const auto& r : rows) max_norm = std::max(max_norm, r.norm());
  std::vector<RowVector> kept;
  if (max_norm == 0.0) return kept;
  for (const auto& r : rows) {
    if (r.norm() >= tol * max_norm) kept.push_back(r);
  }
  return kept;
}

/// True iff the nonzero rows have full row rank. Rows are normalized before
/// the singular value test, so the verdict is invariant to row scaling.
inline bool is_independent(const std::vector<RowVector>& rows, double tol = 1e-6)
{
  if (rows.empty()) throw ConfigError("is_independent: no rows given");
  const Eigen::Index m = rows.front().size();
  for (const auto& r : rows) require_dim(r.size(), m, "is_independent row");
  const auto kept = nonzero_rows(rows, tol);
  if (kept.empty()) return true;
  if (static_cast<Eigen::Index>(kept.size()) > m) return false;
  Matrix a(static_cast<Eigen::Index>(kept.size()), m);
  for (std::size_t i = 0; i < kept.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = kept[i].normalized();
  const Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff() > tol;
}

/// |<a, b>| / (|a| |b|), or 0 when either vector has norm below `tol`.
inline double abs_cosine(const RowVector& a, const RowVector& b, double tol = 1e-12)
{
  const double na = a.norm();
  const double nb = b.norm();
  if (na < tol || nb < tol) return 0.0;
  return std::min(1.0, std::abs(a.dot(b)) / (na * nb));
}

/// Largest |cosine| between `candidate` and any of `priors`.
inline double orthogonality_residual(const RowVector& candidate, const std::vector<RowVector>& priors,
                                     double tol = 1e-12)
{
  double worst = 0.0;
  for (const auto& p : priors) {
    require_dim(p.size(), candidate.size(), "orthogonality_residual row");
    worst = std::max(worst, abs_cosine(p, candidate, tol));
  }
  return worst;
}

/// || u*(R(x), LgJ_new) - (-1/2 LgJ_new^T) ||, where R(x) is built from the
/// priors with unit weights. Zero exactly when LgJ_new is orthogonal to
/// every prior row (for independent priors).
inline double prop3_policy_gap(const ValueFunction& candidate,
                               const std::vector<std::shared_ptr<const ValueFunction>>& priors,
                               const ControlAffineSystem& sys, const Vector& x)
{
  InputMetric metric;
  for (const auto& p : priors) metric.penalties.push_back({p, 1.0, 0.0});
  const RowVector lg = lie_derivatives(sys, candidate, x).lg;
  const Vector u = optimal_input(input_metric_at(metric, sys, x), lg);
  return (u + 0.5 * lg.transpose()).norm();
}

struct IndependenceFailure
{
  Vector state;
  std::string reason;
};

struct IndependenceReport
{
  int samples = 0;
  /// States where every task is active (gradient above the activity threshold).
  int active_states = 0;
  /// Independent states / samples; states with all-zero rows count as independent.
  double fraction_independent = 0.0;
  /// Independent states / active_states.
  double fraction_independent_active = 0.0;
  double mean_abs_cosine = 0.0;
  double max_abs_cosine = 0.0;
  /// Pairs counted in the cosine statistics.
  int cosine_pairs = 0;
  /// Minimum determinant of the Gram matrix of normalized rows over active
  /// states; 1 when rows are orthonormal, 0 when dependent.
  double min_gram_det = 1.0;
  std::vector<IndependenceFailure> failures;
};

struct ReportOptions
{
  int samples = 10000;
  double tol = 1e-6;
  /// A task counts as active at x when |LgJ(x)| >= activity * max over the
  /// sweep of |LgJ|; inactive tasks are treated as completed there.
  double activity = 1e-2;
  std::uint64_t seed = 0;
  std::size_t max_failures = 20;
};

/// Monte-Carlo sweep of independence statistics over `region`.
inline IndependenceReport report(const std::vector<std::shared_ptr<const ValueFunction>>& values,
                                 const ControlAffineSystem& sys, const Box& region, const ReportOptions& opt = {})
{
  if (values.empty()) throw ConfigError("report: no value functions given");
  if (opt.samples < 1) throw ConfigError("report: samples must be at least 1");
  region.validate();
  require_dim(region.dim(), sys.state_dim(), "report region");
  for (const auto& v : values) require_dim(v->input_dim(), sys.state_dim(), "report value function");

  std::mt19937_64 rng(derive_seed(opt.seed, seed_stream::report));
  const Matrix states = sample_box(region, opt.samples, rng);
  const auto k = values.size();
  std::vector<Matrix> lg(k); // per task: samples x m
  std::vector<double> max_norm(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    RowVector vals;
    Matrix grads;
    values[t]->evaluate(states, vals, &grads);
    lg[t].resize(opt.samples, sys.input_dim());
    for (int s = 0; s < opt.samples; ++s) {
      const RowVector g = grads.col(s).transpose();
      lg[t].row(s) = sys.is_integrator() ? g : RowVector(g * sys.input_map(states.col(s)));
      max_norm[t] = std::max(max_norm[t], lg[t].row(s).norm());
    }
  }

  IndependenceReport rep;
  rep.samples = opt.samples;
  int independent = 0;
  int independent_active = 0;
  double cos_sum = 0.0;
  for (int s = 0; s < opt.samples; ++s) {
    std::vector<RowVector> rows;
    bool all_active = true;
    for (std::size_t t = 0; t < k; ++t) {
      rows.push_back(lg[t].row(s));
      if (!(rows.back().norm() >= opt.activity * max_norm[t]) || max_norm[t] == 0.0) all_active = false;
    }
    const bool indep = is_independent(rows, opt.tol);
    independent += indep ? 1 : 0;
    if (all_active) {
      ++rep.active_states;
      independent_active += indep ? 1 : 0;
      Matrix unit(static_cast<Eigen::Index>(k), sys.input_dim());
      for (std::size_t t = 0; t < k; ++t) unit.row(static_cast<Eigen::Index>(t)) = rows[t].normalized();
      rep.min_gram_det = std::min(rep.min_gram_det, (unit * unit.transpose()).determinant());
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
          const double c = abs_cosine(rows[a], rows[b]);
          cos_sum += c;
          rep.max_abs_cosine = std::max(rep.max_abs_cosine, c);
          ++rep.cosine_pairs;
        }
      }
    }
    if (!indep && rep.failures.size() < opt.max_failures) {
      rep.failures.push_back({states.col(s), all_active ? "dependent gradients" : "dependent gradients (inactive task)"});
    }
  }
  rep.fraction_independent = static_cast<double>(independent) / opt.samples;
  rep.fraction_independent_active =
    rep.active_states > 0 ? static_cast<double>(independent_active) / rep.active_states : 0.0;
  rep.mean_abs_cosine = rep.cosine_pairs > 0 ? cos_sum / rep.cosine_pairs : 0.0;
  if (rep.active_states == 0) rep.min_gram_det = 0.0;
  return rep;
}

} // namespace indistack
