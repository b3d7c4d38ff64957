#pragma once

/// @file
/// @brief JSON persistence for ValueNet.
///
/// Layout:
/// @code
/// {
///   "layer_dims": [2, 64, 64, 1],
///   "activation": "tanh",
///   "seed": 7,
///   "weights": [ [[w00, w01], [w10, w11], ...], ... ],   // per layer, row-major (out x in)
///   "biases":  [ [b0, b1, ...], ... ],                   // per layer
///   "metadata": { ... }                                  // optional, free form
/// }
/// @endcode
/// Doubles are written in shortest round-trip form, so save/load
/// reproduces every parameter bit for bit.

#include "value_net.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace indistack {

struct ModelFile
{
  ValueNet net;
  nlohmann::json metadata = nlohmann::json::object();
};

inline nlohmann::json model_to_json(const ValueNet& net, const nlohmann::json& metadata = nlohmann::json::object())
{
  nlohmann::json j;
  j["layer_dims"] = net.layer_dims();
  j["activation"] = to_string(net.activation());
  j["seed"] = net.seed();
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) row.push_back(layer.weight(i, k));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) b.push_back(layer.bias(i));
    biases.push_back(std::move(b));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  if (!metadata.empty()) j["metadata"] = metadata;
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j)
{
  try {
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    ValueNet::validate_dims(dims);
    const auto activation = parse_activation(j.at("activation").get<std::string>());
    const auto seed = j.value("seed", std::uint64_t{0});
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != dims.size() - 1 || biases.size() != dims.size() - 1) {
      throw ConfigError("model: expected " + std::to_string(dims.size() - 1) + " layers of weights and biases");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const int in = dims[l];
      const int out = dims[l + 1];
      const auto& w = weights[l];
      const auto& b = biases[l];
      if (static_cast<int>(w.size()) != out || static_cast<int>(b.size()) != out) {
        throw ConfigError("model: layer " + std::to_string(l) + " does not match layer_dims");
      }
      DenseLayer layer{Matrix(out, in), Vector(out)};
      for (int i = 0; i < out; ++i) {
        if (static_cast<int>(w[i].size()) != in) {
          throw ConfigError("model: layer " + std::to_string(l) + " row " + std::to_string(i) +
                            " has wrong length");
        }
        for (int k = 0; k < in; ++k) layer.weight(i, k) = w[i][k].get<double>();
        layer.bias(i) = b[i].get<double>();
      }
      layers.push_back(std::move(layer));
    }
    ModelFile file{ValueNet::from_layers(std::move(layers), activation, seed), nlohmann::json::object()};
    if (j.contains("metadata")) file.metadata = j.at("metadata");
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: malformed JSON structure: ") + e.what());
  }
}

inline void save_model(const std::string& path, const ValueNet& net,
                       const nlohmann::json& metadata = nlohmann::json::object())
{
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file '" + path + "'");
  out << model_to_json(net, metadata).dump(1) << '\n';
}

inline ModelFile load_model(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

} // namespace indistack
