#pragma once

/// @file
/// @brief Continuous fitted value iteration.
///
/// Each iteration samples a dataset of states, computes forward-view
/// TD(lambda) targets by rolling the system forward under the analytic
/// optimal input u* = -1/2 R(x)^{-1} LgJ(x)^T of the current estimate, and
/// regresses the network onto those targets.

#include "common.hpp"
#include "dynamics.hpp"
#include "parallel.hpp"
#include "tasks.hpp"
#include "value_net.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

namespace indistack {

struct TrainConfig
{
  int dataset_size = 1024;
  Box region = Box::cube(2, -3.0, 3.0);
  int iterations = 200;
  int horizon = 20;
  double td_lambda = 0.9;
  double gamma = 0.99;
  double dt = 0.01;
  int batch_size = 128;
  double learning_rate = 1e-3;
  /// When set, the step size decays geometrically from learning_rate at
  /// the first iteration to this value at the last one.
  std::optional<double> final_learning_rate;
  std::uint64_t seed = 0;
  int epochs = 4;
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::tanh;
  /// Bound on each penalty's LgJ norm inside R(x); <= 0 disables clamping.
  double penalty_clamp = 10.0;
  /// Amount subtracted from each penalty's LgJ norm before clamping, so
  /// small fitting ripples in a prior do not restrict the input.
  double penalty_deadzone = 0.0;
  /// Abort when mean |target| grows by more than this factor over
  /// `divergence_window` iterations (relative to max(previous, 1)).
  double divergence_factor = 100.0;
  int divergence_window = 5;
  /// 0 selects INDISTACK_THREADS / hardware concurrency.
  int threads = 0;
  /// Lower bound applied to bootstrapped values J(x_n) inside the returns.
  /// Costs with q >= 0 have J >= 0, so a floor of 0 keeps fitting ripples
  /// from propagating through the bootstrap. Unset means no floor.
  std::optional<double> bootstrap_floor;
  /// Share of each dataset drawn as a cluster of planar robots: a common
  /// centre uniform in the box's first two coordinates plus Gaussian offsets
  /// per robot. The rest is uniform over the box.
  double cluster_fraction = 0.0;
  double cluster_stddev = 0.3;

  void validate() const
  {
    region.validate();
    if (dataset_size < 1 || iterations < 1 || horizon < 1 || batch_size < 1 || epochs < 1) {
      throw ConfigError("train config: sizes and counts must be positive");
    }
    if (!(td_lambda >= 0.0 && td_lambda <= 1.0)) throw ConfigError("train config: td_lambda must lie in [0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train config: gamma must lie in (0, 1]");
    if (!(dt > 0.0) || !(learning_rate > 0.0)) throw ConfigError("train config: dt and learning rate must be positive");
    if (!(penalty_deadzone >= 0.0)) throw ConfigError("train config: penalty_deadzone must be nonnegative");
    if (!(cluster_fraction >= 0.0 && cluster_fraction <= 1.0)) {
      throw ConfigError("train config: cluster_fraction must lie in [0, 1]");
    }
    if (cluster_fraction > 0.0 && (!(cluster_stddev > 0.0) || region.dim() % 2 != 0)) {
      throw ConfigError("train config: clustered sampling needs a positive stddev and planar robot blocks");
    }
    if (final_learning_rate && !(*final_learning_rate > 0.0)) {
      throw ConfigError("train config: final learning rate must be positive");
    }
    for (int h : hidden) {
      if (h < 1) throw ConfigError("train config: hidden layer widths must be positive");
    }
  }
};

/// u* = -1/2 R^{-1} LgJ^T, via a Cholesky solve.
inline Vector optimal_input(const Matrix& metric, const RowVector& lg)
{
  require_dim(metric.rows(), lg.size(), "optimal_input metric");
  require_dim(metric.cols(), lg.size(), "optimal_input metric");
  Eigen::LLT<Matrix> llt(metric);
  if (llt.info() != Eigen::Success) {
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(metric, Eigen::EigenvaluesOnly).eigenvalues()(0);
    std::ostringstream msg;
    msg << "optimal_input: input metric is not positive definite (min eigenvalue " << min_eig << ")";
    throw NumericalError(msg.str());
  }
  return -0.5 * llt.solve(lg.transpose());
}

/// Mixes n-step returns G_1..G_H into the truncated forward-view target
///   sum_{n=1}^{H-1} ((1 - lambda) lambda^{n-1}) G_n + lambda^{H-1} G_H,
/// accumulated in increasing n with lambda powers formed by repeated
/// multiplication from 1. lambda = 0 yields G_1 and lambda = 1 yields G_H
/// exactly.
inline double mix_returns(const Vector& returns, double td_lambda)
{
  const Eigen::Index h = returns.size();
  double target = 0.0;
  double weight = 1.0;
  for (Eigen::Index n = 0; n + 1 < h; ++n) {
    target += ((1.0 - td_lambda) * weight) * returns(n);
    weight *= td_lambda;
  }
  return target + weight * returns(h - 1);
}

namespace detail {

/// Rolls every column of `states` forward for cfg.horizon steps and fills
/// `returns` (H x B) with the n-step returns
///   G_n = sum_{i<n} gamma^i (c(x_i, u_i) dt) + gamma^n J(x_n),
/// where the running sum is accumulated as acc += gamma^i * (c_i * dt) and
/// gamma^i is formed by repeated multiplication from 1. J(x_n) is raised to
/// cfg.bootstrap_floor when one is set.
inline void rollout_returns_batch(const ValueFunction& value, const ControlAffineSystem& sys, const TaskSpec& task,
                                  Matrix states, const TrainConfig& cfg, Matrix& returns)
{
  const Eigen::Index m = sys.input_dim();
  const Eigen::Index batch = states.cols();
  const int horizon = cfg.horizon;
  returns.resize(horizon, batch);

  Vector acc = Vector::Zero(batch);
  double discount = 1.0;
  RowVector values;
  Matrix grads;
  std::vector<Matrix> penalty_grads(task.input_metric.penalties.size());
  RowVector penalty_values;

  for (int step = 0; step <= horizon; ++step) {
    const bool last = step == horizon;
    value.evaluate(states, values, last ? nullptr : &grads);
    if (step > 0) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        const double v = cfg.bootstrap_floor ? std::max(values(b), *cfg.bootstrap_floor) : values(b);
        returns(step - 1, b) = acc(b) + discount * v;
      }
    }
    if (last) break;

    for (std::size_t p = 0; p < penalty_grads.size(); ++p) {
      task.input_metric.penalties[p].value->evaluate(states, penalty_values, &penalty_grads[p]);
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Vector x = states.col(b);
      Matrix g;
      RowVector lg;
      if (sys.is_integrator()) {
        lg = grads.col(b).transpose();
      } else {
        g = sys.input_map(x);
        lg = grads.col(b).transpose() * g;
      }
      Matrix metric = Matrix::Identity(m, m);
      for (std::size_t p = 0; p < penalty_grads.size(); ++p) {
        const auto& pen = task.input_metric.penalties[p];
        RowVector plg = sys.is_integrator() ? RowVector(penalty_grads[p].col(b).transpose())
                                            : RowVector(penalty_grads[p].col(b).transpose() * g);
        plg = penalty_row(pen, std::move(plg));
        metric.noalias() += pen.lambda * plg.transpose() * plg;
      }
      const Vector u = optimal_input(metric, lg);
      const double cost = instantaneous_cost(eval_state_cost(task.state_cost, x), metric, u);
      if (!std::isfinite(cost)) {
        throw TrainingError("rollout: non-finite cost at step " + std::to_string(step));
      }
      acc(b) += discount * (cost * cfg.dt);
      if (sys.is_integrator()) {
        states.col(b) += u * cfg.dt;
      } else {
        states.col(b) += (sys.drift(x) + g * u) * cfg.dt;
      }
      if (!states.col(b).allFinite()) {
        throw TrainingError("rollout: non-finite state at step " + std::to_string(step + 1));
      }
    }
    discount *= cfg.gamma;
  }
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int s = 0; s < horizon; ++s) {
      if (!std::isfinite(returns(s, b))) {
        throw TrainingError("rollout: non-finite return at step " + std::to_string(s + 1));
      }
    }
  }
}

} // namespace detail

/// The n-step returns G_1..G_H from a single start state.
inline Vector rollout_returns(const ValueFunction& value, const ControlAffineSystem& sys, const TaskSpec& task,
                              const Vector& x0, const TrainConfig& cfg)
{
  require_dim(x0.size(), sys.state_dim(), "rollout start state");
  require_dim(value.input_dim(), sys.state_dim(), "value function vs system");
  if (cfg.horizon < 1) throw ConfigError("rollout: horizon must be at least 1");
  Matrix returns;
  detail::rollout_returns_batch(value, sys, task, x0, cfg, returns);
  return returns.col(0);
}

/// Forward-view TD(lambda) target for a single start state.
inline double rollout_target(const ValueFunction& value, const ControlAffineSystem& sys, const TaskSpec& task,
                             const Vector& x0, const TrainConfig& cfg)
{
  return mix_returns(rollout_returns(value, sys, task, x0, cfg), cfg.td_lambda);
}

/// Targets for every column of `states`. Work is split into fixed chunks
/// so the result does not depend on the worker count.
inline Vector rollout_targets(const ValueFunction& value, const ControlAffineSystem& sys, const TaskSpec& task,
                              const Matrix& states, const TrainConfig& cfg)
{
  require_dim(states.rows(), sys.state_dim(), "rollout start states");
  require_dim(value.input_dim(), sys.state_dim(), "value function vs system");
  constexpr std::size_t chunk = 64;
  Vector targets(states.cols());
  parallel_chunks(static_cast<std::size_t>(states.cols()), chunk, resolve_threads(cfg.threads),
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    const auto b0 = static_cast<Eigen::Index>(begin);
                    const auto len = static_cast<Eigen::Index>(end - begin);
                    Matrix returns;
                    detail::rollout_returns_batch(value, sys, task, states.middleCols(b0, len), cfg, returns);
                    for (Eigen::Index b = 0; b < len; ++b) {
                      targets(b0 + b) = mix_returns(returns.col(b), cfg.td_lambda);
                    }
                  });
  return targets;
}

struct IterationMetrics
{
  int iteration = 0;
  double mean_target = 0.0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

using MetricsCallback = std::function<void(const IterationMetrics&)>;

/// `count` states drawn uniformly from `box`.
inline Matrix sample_box(const Box& box, Eigen::Index count, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix states(box.dim(), count);
  for (Eigen::Index c = 0; c < count; ++c) {
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
      states(i, c) = box.lo(i) + (box.hi(i) - box.lo(i)) * unit(rng);
    }
  }
  return states;
}

/// One training dataset: uniform over cfg.region, with a cfg.cluster_fraction
/// share replaced by clustered robot configurations.
inline Matrix sample_dataset(const TrainConfig& cfg, std::mt19937_64& rng)
{
  const auto clustered = static_cast<Eigen::Index>(std::lround(cfg.cluster_fraction * cfg.dataset_size));
  Matrix states(cfg.region.dim(), cfg.dataset_size);
  states.leftCols(cfg.dataset_size - clustered) = sample_box(cfg.region, cfg.dataset_size - clustered, rng);
  std::uniform_real_distribution<double> ux(cfg.region.lo(0), cfg.region.hi(0));
  std::uniform_real_distribution<double> uy(cfg.region.lo(1), cfg.region.hi(1));
  std::normal_distribution<double> noise(0.0, cfg.cluster_stddev);
  for (Eigen::Index c = cfg.dataset_size - clustered; c < cfg.dataset_size; ++c) {
    const double cx = ux(rng);
    const double cy = uy(rng);
    for (Eigen::Index i = 0; i < cfg.region.dim(); i += 2) {
      states(i, c) = cx + noise(rng);
      states(i + 1, c) = cy + noise(rng);
    }
  }
  return states;
}

/// Runs fitted value iteration for `task` and returns the trained network.
/// A fresh dataset is drawn from cfg.region every iteration. The result is
/// a deterministic function of (task, sys, cfg) for any worker count.
inline ValueNet value_iteration(const TaskSpec& task, const ControlAffineSystem& sys, const TrainConfig& cfg,
                                const MetricsCallback& on_iteration = {})
{
  cfg.validate();
  task.validate();
  require_dim(cfg.region.dim(), sys.state_dim(), "training region");
  for (const auto& p : task.input_metric.penalties) {
    require_dim(p.value->input_dim(), sys.state_dim(), "penalty value function");
  }

  std::vector<int> dims{static_cast<int>(sys.state_dim())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);
  ValueNet net = ValueNet::init(dims, cfg.activation, cfg.seed);
  // Rescale the first layer so the training box maps to [-1, 1]^n at init.
  {
    DenseLayer& first = net.layers().front();
    const Vector center = 0.5 * (cfg.region.lo + cfg.region.hi);
    const Vector half = 0.5 * (cfg.region.hi - cfg.region.lo);
    first.weight = first.weight * half.cwiseInverse().asDiagonal();
    first.bias -= first.weight * center;
  }
  AdamState opt = net.make_optimizer(cfg.learning_rate);

  std::deque<double> history;
  for (int k = 0; k < cfg.iterations; ++k) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.final_learning_rate && cfg.iterations > 1) {
      const double frac = static_cast<double>(k) / (cfg.iterations - 1);
      opt.learning_rate = cfg.learning_rate * std::pow(*cfg.final_learning_rate / cfg.learning_rate, frac);
    }
    std::mt19937_64 data_rng(derive_seed(cfg.seed, seed_stream::dataset, static_cast<std::uint64_t>(k)));
    const Matrix states = sample_dataset(cfg, data_rng);
    const Vector targets = rollout_targets(net, sys, task, states, cfg);

    const double mean_target = targets.mean();
    const double mean_abs = targets.cwiseAbs().mean();
    history.push_back(mean_abs);
    if (static_cast<int>(history.size()) > cfg.divergence_window) {
      const double before = std::max(history.front(), 1.0);
      history.pop_front();
      if (mean_abs > cfg.divergence_factor * before) {
        std::ostringstream msg;
        msg << "value iteration diverged at iteration " << k << ": mean |target| " << mean_abs << " vs " << before
            << " " << cfg.divergence_window << " iterations earlier";
        throw TrainingError(msg.str());
      }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(cfg.dataset_size));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    double epoch_loss = 0.0;
    for (int e = 0; e < cfg.epochs; ++e) {
      std::mt19937_64 shuffle_rng(
        derive_seed(cfg.seed, seed_stream::shuffle, static_cast<std::uint64_t>(k) * 1000003ULL + e));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double total = 0.0;
      int batches = 0;
      for (int b0 = 0; b0 < cfg.dataset_size; b0 += cfg.batch_size) {
        const int len = std::min(cfg.batch_size, cfg.dataset_size - b0);
        Matrix xb(states.rows(), len);
        Vector tb(len);
        for (int i = 0; i < len; ++i) {
          xb.col(i) = states.col(order[static_cast<std::size_t>(b0 + i)]);
          tb(i) = targets(order[static_cast<std::size_t>(b0 + i)]);
        }
        total += fit_batch(net, xb, tb, opt);
        ++batches;
      }
      epoch_loss = total / batches;
    }

    if (on_iteration) {
      const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      on_iteration({k, mean_target, epoch_loss, ms});
    }
  }
  return net;
}

/// A previously trained task the new one must stay independent of.
struct PriorTask
{
  std::shared_ptr<const ValueFunction> value;
  double lambda = 0.0;
};

/// Value iteration on q(x) + u^T (I + sum_i lambda_i LgJ_i^T LgJ_i) u.
/// With no priors this is exactly value_iteration on the base task.
inline ValueNet train_independent(const TaskSpec& base, const std::vector<PriorTask>& priors,
                                  const ControlAffineSystem& sys, const TrainConfig& cfg,
                                  const MetricsCallback& on_iteration = {})
{
  TaskSpec task = base;
  for (const auto& prior : priors) {
    if (!prior.value) throw ConfigError("train_independent: missing prior value function");
    require_dim(prior.value->input_dim(), sys.state_dim(), "prior value function");
    task.input_metric.penalties.push_back({prior.value, prior.lambda, cfg.penalty_clamp, cfg.penalty_deadzone});
  }
  return value_iteration(task, sys, cfg, on_iteration);
}

} // namespace indistack
