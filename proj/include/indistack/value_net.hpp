#pragma once

/// @file
/// @brief Smooth multilayer perceptron for cost-to-go approximation.
///
/// The network maps a state x in R^n to a scalar J(x; theta). Hidden layers
/// use a smooth activation so that the input gradient dJ/dx exists
/// everywhere; the output layer is linear. Both input gradients (for Lie
/// derivatives) and parameter gradients (for regression) are computed by
/// reverse-mode differentiation over column batches of states.

#include "common.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace indistack {

/// A differentiable scalar field over states. Implementations must be
/// pure and safe to call concurrently.
class ValueFunction
{
public:
  virtual ~ValueFunction() = default;

  virtual Eigen::Index input_dim() const = 0;

  /// Evaluates the field at each column of `states` (n x B). `values`
  /// receives 1 x B; when `grads` is non-null it receives n x B with the
  /// gradient at state b in column b.
  virtual void evaluate(const Matrix& states, RowVector& values, Matrix* grads) const = 0;

  double value(const Vector& x) const
  {
    require_dim(x.size(), input_dim(), "value function input");
    RowVector v;
    evaluate(x, v, nullptr);
    return v(0);
  }

  /// dJ/dx as a row vector.
  RowVector gradient(const Vector& x) const
  {
    require_dim(x.size(), input_dim(), "value function input");
    RowVector v;
    Matrix g;
    evaluate(x, v, &g);
    return g.col(0).transpose();
  }
};

enum class Activation
{
  tanh,
  softplus,
};

inline std::string to_string(Activation a)
{
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  return "tanh";
}

inline Activation parse_activation(const std::string& name)
{
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  if (name == "relu" || name == "leaky_relu" || name == "hardtanh") {
    throw ConfigError("activation '" + name +
                      "' is piecewise linear; input gradients must exist everywhere");
  }
  throw ConfigError("unknown activation '" + name + "'");
}

struct DenseLayer
{
  Matrix weight; // out x in
  Vector bias;   // out
};

/// Adam moment estimates, shaped like the network's layers.
struct AdamState
{
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<DenseLayer> first;
  std::vector<DenseLayer> second;
};

class ValueNet final : public ValueFunction
{
public:
  ValueNet() = default;

  /// Builds a network with layer sizes `layer_dims` (input first, output
  /// last and equal to 1). Weights and biases of a layer with fan-in k are
  /// drawn uniformly from [-1/sqrt(k), 1/sqrt(k)] using a generator seeded
  /// from `seed`.
  static ValueNet init(const std::vector<int>& layer_dims, Activation activation, std::uint64_t seed)
  {
    validate_dims(layer_dims);
    ValueNet net;
    net.dims_ = layer_dims;
    net.activation_ = activation;
    net.seed_ = seed;
    std::mt19937_64 rng(derive_seed(seed, seed_stream::net_init));
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
      const int fan_in = layer_dims[l];
      const int fan_out = layer_dims[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out)};
      for (int i = 0; i < fan_out; ++i) {
        for (int j = 0; j < fan_in; ++j) layer.weight(i, j) = dist(rng);
      }
      for (int i = 0; i < fan_out; ++i) layer.bias(i) = dist(rng);
      net.layers_.push_back(std::move(layer));
    }
    return net;
  }

  /// Builds a network from explicit parameters (used by the model loader).
  static ValueNet from_layers(std::vector<DenseLayer> layers, Activation activation, std::uint64_t seed)
  {
    if (layers.empty()) throw ConfigError("value net: at least one layer is required");
    std::vector<int> dims{static_cast<int>(layers.front().weight.cols())};
    for (const auto& layer : layers) {
      if (layer.weight.cols() != dims.back() || layer.bias.size() != layer.weight.rows()) {
        throw ConfigError("value net: inconsistent layer shapes");
      }
      dims.push_back(static_cast<int>(layer.weight.rows()));
    }
    validate_dims(dims);
    ValueNet net;
    net.dims_ = std::move(dims);
    net.activation_ = activation;
    net.seed_ = seed;
    net.layers_ = std::move(layers);
    return net;
  }

  static void validate_dims(const std::vector<int>& dims)
  {
    if (dims.size() < 2) throw ConfigError("value net: layer_dims needs at least an input and an output entry");
    for (int d : dims) {
      if (d < 1) throw ConfigError("value net: every layer dimension must be positive");
    }
    if (dims.back() != 1) throw ConfigError("value net: output dimension must be 1");
  }

  Eigen::Index input_dim() const override { return dims_.empty() ? 0 : dims_.front(); }
  const std::vector<int>& layer_dims() const { return dims_; }
  Activation activation() const { return activation_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t parameter_count() const
  {
    std::size_t count = 0;
    for (const auto& layer : layers_) count += layer.weight.size() + layer.bias.size();
    return count;
  }

  double forward(const Vector& x) const { return value(x); }
  RowVector input_grad(const Vector& x) const { return gradient(x); }

  void evaluate(const Matrix& states, RowVector& values, Matrix* grads) const override
  {
    require_dim(states.rows(), input_dim(), "value net input");
    const std::size_t hidden = layers_.size() - 1;
    std::vector<Matrix> slopes(hidden);
    Matrix a = states;
    for (std::size_t l = 0; l < hidden; ++l) {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      apply_activation(z, a, grads ? &slopes[l] : nullptr);
    }
    values = layers_.back().weight * a;
    values.array() += layers_.back().bias(0);
    if (!grads) return;
    Matrix g = layers_.back().weight.transpose().replicate(1, states.cols());
    for (std::size_t l = hidden; l-- > 0;) {
      g = g.cwiseProduct(slopes[l]);
      g = layers_[l].weight.transpose() * g;
    }
    *grads = std::move(g);
  }

  AdamState make_optimizer(double learning_rate = 1e-3) const
  {
    AdamState state;
    state.learning_rate = learning_rate;
    for (const auto& layer : layers_) {
      state.first.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                             Vector::Zero(layer.bias.size())});
    }
    state.second = state.first;
    return state;
  }

  /// Mean squared error of the network on (states, targets) and its
  /// gradient with respect to every parameter.
  double loss_and_gradient(const Matrix& states, const Vector& targets, std::vector<DenseLayer>& grad) const
  {
    require_dim(states.rows(), input_dim(), "value net input");
    require_dim(targets.size(), states.cols(), "regression targets");
    const std::size_t hidden = layers_.size() - 1;
    std::vector<Matrix> acts(hidden + 1);
    std::vector<Matrix> slopes(hidden);
    acts[0] = states;
    for (std::size_t l = 0; l < hidden; ++l) {
      Matrix z = layers_[l].weight * acts[l];
      z.colwise() += layers_[l].bias;
      apply_activation(z, acts[l + 1], &slopes[l]);
    }
    RowVector out = layers_.back().weight * acts[hidden];
    out.array() += layers_.back().bias(0);
    const RowVector residual = out - targets.transpose();
    const double batch = static_cast<double>(states.cols());
    const double loss = residual.squaredNorm() / batch;

    grad.resize(layers_.size());
    Matrix delta = (2.0 / batch) * residual;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      grad[l].weight = delta * acts[l].transpose();
      grad[l].bias = delta.rowwise().sum();
      if (l == 0) break;
      delta = (layers_[l].weight.transpose() * delta).cwiseProduct(slopes[l - 1]);
    }
    return loss;
  }

private:
  void apply_activation(const Matrix& z, Matrix& a, Matrix* slope) const
  {
    switch (activation_) {
      case Activation::tanh:
        a = z.array().tanh().matrix();
        if (slope) *slope = (1.0 - a.array().square()).matrix();
        break;
      case Activation::softplus:
        // log(1 + e^z) evaluated without overflow for large |z|.
        a = (z.array().max(0.0) + (-z.array().abs()).exp().log1p()).matrix();
        if (slope) *slope = (1.0 / (1.0 + (-z.array()).exp())).matrix();
        break;
    }
  }

  std::vector<int> dims_;
  Activation activation_ = Activation::tanh;
  std::uint64_t seed_ = 0;
  std::vector<DenseLayer> layers_;
};

/// One Adam update on the mean squared error between `net` and `targets`
/// over the columns of `states`. Returns the loss before the update.
/// Throws TrainingError naming the first non-finite target.
inline double fit_batch(ValueNet& net, const Matrix& states, const Vector& targets, AdamState& opt)
{
  if (states.cols() < 1) throw ConfigError("fit_batch: empty batch");
  require_dim(targets.size(), states.cols(), "fit_batch targets");
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    if (!std::isfinite(targets(i))) {
      throw TrainingError("fit_batch: non-finite target at index " + std::to_string(i));
    }
  }
  if (opt.first.size() != net.layers().size()) opt = net.make_optimizer(opt.learning_rate);

  std::vector<DenseLayer> grad;
  const double loss = net.loss_and_gradient(states, targets, grad);

  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    param.array() -= opt.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
  };
  for (std::size_t l = 0; l < grad.size(); ++l) {
    auto& layer = net.layers()[l];
    update(layer.weight, opt.first[l].weight, opt.second[l].weight, grad[l].weight);
    update(layer.bias, opt.first[l].bias, opt.second[l].bias, grad[l].bias);
  }
  return loss;
}

} // namespace indistack
