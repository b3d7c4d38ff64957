#pragma once

/// @file
/// @brief Control-affine dynamics x' = f(x) + g(x) u, explicit Euler
/// stepping and Lie derivatives of value functions.

#include "common.hpp"
#include "value_net.hpp"

#include <functional>
#include <string>
#include <utility>

namespace indistack {

class ControlAffineSystem
{
public:
  using Drift = std::function<Vector(const Vector&)>;
  using InputMap = std::function<Matrix(const Vector&)>;

  ControlAffineSystem(Eigen::Index state_dim, Eigen::Index input_dim, Drift f, InputMap g,
                      int robot_count = 1)
    : n_(state_dim), m_(input_dim), f_(std::move(f)), g_(std::move(g)), robots_(robot_count)
  {
    if (n_ < 1 || m_ < 1) throw ConfigError("system: state and input dimensions must be positive");
    if (robot_count < 1 || n_ % robot_count != 0) {
      throw ConfigError("system: state dimension must split evenly across robots");
    }
  }

  /// x' = u in R^n, split into `robot_count` equal blocks.
  static ControlAffineSystem integrator(Eigen::Index n, int robot_count = 1)
  {
    ControlAffineSystem sys(
      n, n, [n](const Vector&) { return Vector::Zero(n); },
      [n](const Vector&) { return Matrix::Identity(n, n); }, robot_count);
    sys.integrator_ = true;
    return sys;
  }

  /// N planar single integrators: x = [p_1 ... p_N], u = [v_1 ... v_N].
  static ControlAffineSystem single_integrator_team(int num_robots)
  {
    if (num_robots < 1) throw ConfigError("single_integrator_team: need at least one robot");
    return integrator(2 * num_robots, num_robots);
  }

  Eigen::Index state_dim() const { return n_; }
  Eigen::Index input_dim() const { return m_; }
  int robot_count() const { return robots_; }
  /// Size of one robot's block in the state vector.
  Eigen::Index robot_dim() const { return n_ / robots_; }
  /// True when f = 0 and g = I; enables batched fast paths.
  bool is_integrator() const { return integrator_; }

  Vector drift(const Vector& x) const
  {
    require_dim(x.size(), n_, "system state");
    Vector fx = f_(x);
    require_dim(fx.size(), n_, "drift output");
    return fx;
  }

  Matrix input_map(const Vector& x) const
  {
    require_dim(x.size(), n_, "system state");
    Matrix gx = g_(x);
    if (gx.rows() != n_ || gx.cols() != m_) throw ShapeError("input map: output has wrong shape");
    return gx;
  }

  /// Segment of `x` belonging to robot `robot` (0-based).
  auto robot_block(const Vector& x, int robot) const { return x.segment(robot * robot_dim(), robot_dim()); }

private:
  Eigen::Index n_;
  Eigen::Index m_;
  Drift f_;
  InputMap g_;
  int robots_ = 1;
  bool integrator_ = false;
};

/// x + (f(x) + g(x) u) dt.
inline Vector euler_step(const ControlAffineSystem& sys, const Vector& x, const Vector& u, double dt)
{
  if (!(dt > 0.0)) throw ConfigError("euler_step: dt must be positive");
  require_dim(x.size(), sys.state_dim(), "euler_step state");
  require_dim(u.size(), sys.input_dim(), "euler_step input");
  if (sys.is_integrator()) return x + u * dt;
  return x + (sys.drift(x) + sys.input_map(x) * u) * dt;
}

struct LieDerivatives
{
  double lf = 0.0;   ///< dJ/dx f(x)
  RowVector lg;      ///< dJ/dx g(x), 1 x m
};

inline LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const ValueFunction& value, const Vector& x)
{
  require_dim(value.input_dim(), sys.state_dim(), "value function vs system");
  require_dim(x.size(), sys.state_dim(), "lie_derivatives state");
  const RowVector grad = value.gradient(x);
  if (sys.is_integrator()) return {0.0, grad};
  return {grad.dot(sys.drift(x).transpose()), grad * sys.input_map(x)};
}

} // namespace indistack
