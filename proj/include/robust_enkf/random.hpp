#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace robust_enkf {

/// Seeded generator owning the standard-normal and uniform variate streams.
///
/// A (seed, stream) pair fully determines the sequence, so Monte Carlo run r
/// can use seed = base_seed + r and independent consumers of the same run
/// (simulator, filters) use distinct streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }

  /// Uniform variate on [0, 1).
  double uniform() { return uniform_(engine_); }

  Eigen::VectorXd standard_normal(Eigen::Index n) {
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i) u(i) = normal();
    return u;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Stream identifiers used by the simulator and the filters.
inline constexpr std::uint64_t kSimulationStream = 0;
inline constexpr std::uint64_t kFilterStream = 1;

}  // namespace robust_enkf
