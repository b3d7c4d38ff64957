#pragma once

/// @file
/// @brief Prioritized min-norm controller over a stack of learned tasks.
///
/// At each state the controller solves
///   min_{u, delta}  ||u||^2 + kappa ||delta||^2
///   s.t.  LfJ_i + LgJ_i u <= -sigma_i + delta_i   (i = 1..N, task 1 first)
///         K delta >= 0
///         [lo <= u <= hi]
/// where sigma_i is the decrease rate J_i would have under its own optimal
/// input. The default K (lower bidiagonal) encodes 0 <= delta_1 <= ... <= delta_N,
/// so higher-priority tasks receive less slack.

#include "common.hpp"
#include "dynamics.hpp"
#include "qp.hpp"
#include "tasks.hpp"
#include "trainer.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace indistack {

struct StackTask
{
  std::shared_ptr<const ValueFunction> value;
  /// Cost definition the value function was trained with; its input
  /// metric determines the optimal-decrease rate sigma.
  TaskSpec spec;
};

/// Rows of the default slack-ordering matrix: delta_1 >= 0 and
/// delta_{i+1} - delta_i >= 0.
inline Matrix default_priority_matrix(Eigen::Index tasks)
{
  Matrix k = Matrix::Zero(tasks, tasks);
  if (tasks == 0) return k;
  k(0, 0) = 1.0;
  for (Eigen::Index i = 1; i < tasks; ++i) {
    k(i, i) = 1.0;
    k(i, i - 1) = -1.0;
  }
  return k;
}

struct PriorityStack
{
  std::vector<StackTask> tasks;
  Matrix priority;     ///< K; empty selects default_priority_matrix
  double kappa = 1e3;
  std::optional<Box> input_bounds;

  Eigen::Index size() const { return static_cast<Eigen::Index>(tasks.size()); }

  Matrix priority_matrix() const { return priority.size() == 0 ? default_priority_matrix(size()) : priority; }

  void validate(const ControlAffineSystem& sys) const
  {
    if (tasks.empty()) throw ConfigError("priority stack: at least one task is required");
    if (!(kappa > 0.0)) throw ConfigError("priority stack: kappa must be positive");
    for (const auto& t : tasks) {
      if (!t.value) throw ConfigError("priority stack: task '" + t.spec.name + "' has no value function");
      require_dim(t.value->input_dim(), sys.state_dim(), "stack task value function");
    }
    if (priority.size() != 0 && priority.cols() != size()) {
      throw ConfigError("priority stack: K must have one column per task");
    }
    if (input_bounds) {
      input_bounds->validate();
      require_dim(input_bounds->dim(), sys.input_dim(), "input bounds");
    }
  }

  /// Moves the task at `from` to position `to` (0 = highest priority).
  void reorder(std::size_t from, std::size_t to)
  {
    if (from >= tasks.size() || to >= tasks.size()) throw ConfigError("priority stack: index out of range");
    StackTask t = std::move(tasks[from]);
    tasks.erase(tasks.begin() + static_cast<std::ptrdiff_t>(from));
    tasks.insert(tasks.begin() + static_cast<std::ptrdiff_t>(to), std::move(t));
  }
};

/// max(0, -(LfJ + LgJ u*)) with u* = optimal_input(R(x), LgJ).
inline double sigma(const ValueFunction& value, const TaskSpec& task, const ControlAffineSystem& sys, const Vector& x)
{
  const LieDerivatives lie = lie_derivatives(sys, value, x);
  const Vector u = optimal_input(input_metric_at(task.input_metric, sys, x), lie.lg);
  return std::max(0.0, -(lie.lf + lie.lg.dot(u.transpose())));
}

struct StackQP
{
  QPProblem problem;
  Eigen::Index input_dim = 0;
  Eigen::Index tasks = 0;
  Vector lf;     ///< per task
  Matrix lg;     ///< N x m
  Vector sigma;  ///< per task
  Vector values; ///< J_i(x) per task
};

inline StackQP build_qp(const PriorityStack& stack, const ControlAffineSystem& sys, const Vector& x)
{
  stack.validate(sys);
  require_dim(x.size(), sys.state_dim(), "controller state");
  const Eigen::Index m = sys.input_dim();
  const Eigen::Index n_tasks = stack.size();
  const Matrix k = stack.priority_matrix();
  const Eigen::Index bound_rows = stack.input_bounds ? 2 * m : 0;

  StackQP qp;
  qp.input_dim = m;
  qp.tasks = n_tasks;
  qp.lf.resize(n_tasks);
  qp.lg.resize(n_tasks, m);
  qp.sigma.resize(n_tasks);
  qp.values.resize(n_tasks);

  const Eigen::Index d = m + n_tasks;
  auto& p = qp.problem;
  p.hessian = Matrix::Zero(d, d);
  p.hessian.diagonal().head(m).setConstant(2.0);
  p.hessian.diagonal().tail(n_tasks).setConstant(2.0 * stack.kappa);
  p.linear = Vector::Zero(d);
  p.constraints = Matrix::Zero(n_tasks + k.rows() + bound_rows, d);
  p.lower = Vector::Zero(p.constraints.rows());

  for (Eigen::Index i = 0; i < n_tasks; ++i) {
    const auto& task = stack.tasks[static_cast<std::size_t>(i)];
    RowVector value;
    Matrix grad_col;
    task.value->evaluate(x, value, &grad_col);
    const RowVector grad = grad_col.col(0).transpose();
    qp.values(i) = value(0);
    const double lf = sys.is_integrator() ? 0.0 : grad.dot(sys.drift(x).transpose());
    const RowVector lg = sys.is_integrator() ? grad : RowVector(grad * sys.input_map(x));
    const Vector u_star = optimal_input(input_metric_at(task.spec.input_metric, sys, x), lg);
    qp.lf(i) = lf;
    qp.lg.row(i) = lg;
    qp.sigma(i) = std::max(0.0, -(lf + lg.dot(u_star.transpose())));
    // -LgJ_i u + delta_i >= LfJ_i + sigma_i
    p.constraints.row(i).head(m) = -lg;
    p.constraints(i, m + i) = 1.0;
    p.lower(i) = lf + qp.sigma(i);
  }
  p.constraints.block(n_tasks, m, k.rows(), n_tasks) = k;
  if (stack.input_bounds) {
    const Eigen::Index r0 = n_tasks + k.rows();
    p.constraints.block(r0, 0, m, m) = Matrix::Identity(m, m);
    p.lower.segment(r0, m) = stack.input_bounds->lo;
    p.constraints.block(r0 + m, 0, m, m) = -Matrix::Identity(m, m);
    p.lower.segment(r0 + m, m) = -stack.input_bounds->hi;
  }
  return qp;
}

struct QPSolution
{
  Vector u;
  Vector delta;
  QPStatus status = QPStatus::max_iter;
  double kkt_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

inline QPSolution solve(const StackQP& qp, double tol = 1e-8, int max_iter = 10000)
{
  const QPResult r = solve_qp(qp.problem, tol, max_iter);
  QPSolution s;
  s.u = r.z.head(qp.input_dim);
  s.delta = r.z.tail(qp.tasks);
  s.status = r.status;
  s.kkt_residual = r.kkt_residual;
  // ||u||^2 + kappa ||delta||^2 equals 1/2 z^T G z for the stack hessian.
  s.objective = r.objective;
  s.iterations = r.iterations;
  return s;
}

struct ControlStep
{
  Vector u;
  Vector next_state;
  QPSolution solution;
  Vector values; ///< J_i(x) before the step, in stack order
};

inline ControlStep control_step(const PriorityStack& stack, const ControlAffineSystem& sys, const Vector& x, double dt,
                                double tol = 1e-8, int max_iter = 10000)
{
  const StackQP qp = build_qp(stack, sys, x);
  ControlStep step;
  step.solution = solve(qp, tol, max_iter);
  step.values = qp.values;
  step.u = step.solution.status == QPStatus::infeasible ? Vector::Zero(sys.input_dim()) : step.solution.u;
  step.next_state = euler_step(sys, x, step.u, dt);
  return step;
}

} // namespace indistack
