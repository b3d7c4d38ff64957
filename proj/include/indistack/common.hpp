#pragma once

/// @file
/// @brief Shared linear-algebra aliases, error types and seed derivation.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace indistack {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// Base of every error thrown by the library. `exit_code()` is the CLI
/// status the error maps to.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid parameters, unknown names, malformed files.
class ConfigError : public Error
{
public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Dimension mismatch between states, inputs, models and systems.
class ShapeError : public Error
{
public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Non-finite values or divergence during training / rollouts.
class TrainingError : public Error
{
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Failed factorizations (e.g. a metric that is not positive definite).
class NumericalError : public Error
{
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what)
{
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(want) + ", got " +
                     std::to_string(got));
  }
}

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent seed for a named subsystem (`stream`) and an
/// index within it (trial number, iteration, ...). Every random consumer in
/// the library obtains its generator seed through this function.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept
{
  return mix64(mix64(seed ^ mix64(stream)) + index);
}

/// Stream identifiers for derive_seed.
namespace seed_stream {
inline constexpr std::uint64_t net_init = 1;
inline constexpr std::uint64_t dataset = 2;
inline constexpr std::uint64_t shuffle = 3;
inline constexpr std::uint64_t initial_states = 4;
inline constexpr std::uint64_t report = 5;
inline constexpr std::uint64_t probes = 6;
} // namespace seed_stream

/// 64-bit FNV-1a; used for content digests in run manifests.
inline std::uint64_t fnv1a64(const std::string& data) noexcept
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Axis-aligned box [lo, hi] in state space.
struct Box
{
  Vector lo;
  Vector hi;

  Eigen::Index dim() const { return lo.size(); }

  void validate() const
  {
    if (lo.size() == 0 || lo.size() != hi.size()) {
      throw ConfigError("box: lower and upper bounds must be non-empty and of equal size");
    }
    if (((hi - lo).array() <= 0.0).any()) {
      throw ConfigError("box: every upper bound must exceed its lower bound");
    }
  }

  static Box cube(Eigen::Index dim, double lo, double hi)
  {
    return Box{Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
  }
};

} // namespace indistack
