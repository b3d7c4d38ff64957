#pragma once

/// @file
/// @brief Task definitions: state costs, the independence-augmented input
/// metric and lifting of single-robot value functions to a robot team.

#include "common.hpp"
#include "dynamics.hpp"
#include "value_net.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace indistack {

/// Axis-aligned rectangle in the plane; the boundary counts as inside.
struct Rect
{
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  static Rect centered(double cx, double cy, double side)
  {
    return {cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2};
  }

  bool contains(double x, double y) const { return x >= xmin && x <= xmax && y >= ymin && y <= ymax; }
  bool valid() const { return xmax > xmin && ymax > ymin; }
};

enum class CostKind
{
  avoid_regions,
  go_to_point,
  formation,
  custom,
};

inline std::string to_string(CostKind k)
{
  switch (k) {
    case CostKind::avoid_regions: return "avoid_regions";
    case CostKind::go_to_point: return "go_to_point";
    case CostKind::formation: return "formation";
    case CostKind::custom: return "custom";
  }
  return "custom";
}

inline CostKind parse_cost_kind(const std::string& s)
{
  if (s == "avoid_regions") return CostKind::avoid_regions;
  if (s == "go_to_point") return CostKind::go_to_point;
  if (s == "formation") return CostKind::formation;
  if (s == "custom") return CostKind::custom;
  throw ConfigError("unknown state cost kind '" + s + "'");
}

/// Positive semi-definite state cost q(x) over a state made of planar
/// robot blocks (robot_dim entries each).
struct StateCost
{
  CostKind kind = CostKind::custom;
  /// avoid_regions: cost per robot inside any region.
  /// go_to_point: multiplier on the distance to `target`.
  /// formation: multiplier on the summed side-length errors.
  double gain = 0.0;
  std::vector<Rect> regions;
  Vector target;
  double side = 0.0;
  /// Robots (0-based) the cost applies to; empty means every robot.
  std::vector<int> robots;
  Eigen::Index robot_dim = 2;
  std::function<double(const Vector&)> custom;

  static StateCost avoid(std::vector<Rect> regions, double cost_inside)
  {
    StateCost c;
    c.kind = CostKind::avoid_regions;
    c.regions = std::move(regions);
    c.gain = cost_inside;
    return c;
  }

  static StateCost go_to(Vector target, double gain)
  {
    StateCost c;
    c.kind = CostKind::go_to_point;
    c.target = std::move(target);
    c.gain = gain;
    return c;
  }

  static StateCost formation_shape(double side, double gain)
  {
    StateCost c;
    c.kind = CostKind::formation;
    c.side = side;
    c.gain = gain;
    return c;
  }

  static StateCost from_function(std::function<double(const Vector&)> q)
  {
    StateCost c;
    c.kind = CostKind::custom;
    c.custom = std::move(q);
    return c;
  }

  std::vector<int> active_robots(Eigen::Index state_dim) const
  {
    if (!robots.empty()) return robots;
    std::vector<int> all(static_cast<std::size_t>(state_dim / robot_dim));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }

  /// Number of robots (from `robots`) currently inside a region.
  int robots_inside(const Vector& x) const
  {
    int count = 0;
    for (int r : active_robots(x.size())) {
      const Eigen::Index o = r * robot_dim;
      for (const auto& rect : regions) {
        if (rect.contains(x(o), x(o + 1))) {
          ++count;
          break;
        }
      }
    }
    return count;
  }
};

inline double eval_state_cost(const StateCost& cost, const Vector& x)
{
  if (cost.kind == CostKind::custom) return cost.custom ? cost.custom(x) : 0.0;
  if (x.size() % cost.robot_dim != 0) throw ShapeError("state cost: state does not split into robot blocks");
  const auto robots = cost.active_robots(x.size());
  const Eigen::Index count = x.size() / cost.robot_dim;
  for (int r : robots) {
    if (r < 0 || r >= count) throw ShapeError("state cost: robot index out of range");
  }
  switch (cost.kind) {
    case CostKind::avoid_regions:
      return cost.gain * cost.robots_inside(x);
    case CostKind::go_to_point: {
      require_dim(cost.target.size(), cost.robot_dim, "go-to-point target");
      double total = 0.0;
      for (int r : robots) total += (x.segment(r * cost.robot_dim, cost.robot_dim) - cost.target).norm();
      return cost.gain * total;
    }
    case CostKind::formation: {
      double total = 0.0;
      for (std::size_t i = 0; i < robots.size(); ++i) {
        for (std::size_t j = i + 1; j < robots.size(); ++j) {
          const double d = (x.segment(robots[i] * cost.robot_dim, cost.robot_dim) -
                            x.segment(robots[j] * cost.robot_dim, cost.robot_dim))
                             .norm();
          total += std::abs(d - cost.side);
        }
      }
      return cost.gain * total;
    }
    case CostKind::custom: break;
  }
  return 0.0;
}

/// One independence penalty lambda * (LgJ(x) u)^2 against a previously
/// trained task. Before forming the rank-one term, the norm of LgJ(x) is
/// reduced by `deadzone` (down to zero) and then capped at `clamp` when
/// `clamp` is positive.
struct Penalty
{
  std::shared_ptr<const ValueFunction> value;
  double lambda = 0.0;
  double clamp = 10.0;
  double deadzone = 0.0;
};

/// R(x) = I + sum_i lambda_i LgJ_i(x)^T LgJ_i(x).
struct InputMetric
{
  std::vector<Penalty> penalties;
};

inline RowVector clamp_row(RowVector row, double bound)
{
  if (bound > 0.0) {
    const double norm = row.norm();
    if (norm > bound) row *= bound / norm;
  }
  return row;
}

/// Soft threshold: scales `row` so its norm drops by `width`, or to zero.
inline RowVector shrink_row(RowVector row, double width)
{
  if (width > 0.0) {
    const double norm = row.norm();
    if (norm <= width) return RowVector::Zero(row.size());
    row *= (norm - width) / norm;
  }
  return row;
}

inline RowVector penalty_row(const Penalty& p, RowVector lg)
{
  return clamp_row(shrink_row(std::move(lg), p.deadzone), p.clamp);
}

inline Matrix input_metric_at(const InputMetric& metric, const ControlAffineSystem& sys, const Vector& x)
{
  const Eigen::Index m = sys.input_dim();
  Matrix r = Matrix::Identity(m, m);
  for (const auto& p : metric.penalties) {
    require_dim(p.value->input_dim(), sys.state_dim(), "penalty value function");
    const RowVector lg = penalty_row(p, lie_derivatives(sys, *p.value, x).lg);
    r.noalias() += p.lambda * lg.transpose() * lg;
  }
  return r;
}

/// q(x) + u^T R u.
inline double instantaneous_cost(double state_cost, const Matrix& metric, const Vector& u)
{
  return state_cost + u.dot(metric * u);
}

struct TaskSpec
{
  std::string name;
  StateCost state_cost;
  InputMetric input_metric;
  /// Robots (0-based) a single-robot task is assigned to after lifting.
  std::vector<int> assigned_robots;

  void validate() const
  {
    for (const auto& p : input_metric.penalties) {
      if (!p.value) throw ConfigError("task '" + name + "': penalty without a value function");
      if (!(p.lambda >= 0.0)) throw ConfigError("task '" + name + "': penalty weights must be nonnegative");
    }
  }
};

/// J(x) = sum_{i in T} j(x_i) where x_i is robot i's block of the team state.
class LiftedValue final : public ValueFunction
{
public:
  LiftedValue(std::shared_ptr<const ValueFunction> single, std::vector<int> robots, int robot_count)
    : single_(std::move(single)), robots_(std::move(robots)), robot_count_(robot_count)
  {
    if (!single_) throw ConfigError("lift_task: missing single-robot value function");
    if (robots_.empty()) throw ConfigError("lift_task: the assigned robot set is empty");
    for (int r : robots_) {
      if (r < 0 || r >= robot_count_) throw ConfigError("lift_task: robot index out of range");
    }
  }

  Eigen::Index input_dim() const override { return single_->input_dim() * robot_count_; }
  const std::vector<int>& robots() const { return robots_; }
  const ValueFunction& single() const { return *single_; }

  void evaluate(const Matrix& states, RowVector& values, Matrix* grads) const override
  {
    require_dim(states.rows(), input_dim(), "lifted value input");
    const Eigen::Index d = single_->input_dim();
    const Eigen::Index batch = states.cols();
    const Eigen::Index k = static_cast<Eigen::Index>(robots_.size());
    Matrix blocks(d, k * batch);
    for (Eigen::Index i = 0; i < k; ++i) {
      blocks.middleCols(i * batch, batch) = states.middleRows(robots_[i] * d, d);
    }
    RowVector v;
    Matrix g;
    single_->evaluate(blocks, v, grads ? &g : nullptr);
    values = RowVector::Zero(batch);
    for (Eigen::Index i = 0; i < k; ++i) values += v.segment(i * batch, batch);
    if (!grads) return;
    grads->setZero(input_dim(), batch);
    for (Eigen::Index i = 0; i < k; ++i) {
      grads->middleRows(robots_[i] * d, d) += g.middleCols(i * batch, batch);
    }
  }

private:
  std::shared_ptr<const ValueFunction> single_;
  std::vector<int> robots_;
  int robot_count_;
};

inline std::shared_ptr<const LiftedValue> lift_task(std::shared_ptr<const ValueFunction> single,
                                                    std::vector<int> robots, const ControlAffineSystem& team)
{
  if (!single) throw ConfigError("lift_task: missing single-robot value function");
  require_dim(single->input_dim(), team.robot_dim(), "single-robot value function");
  return std::make_shared<LiftedValue>(std::move(single), std::move(robots), team.robot_count());
}

} // namespace indistack
