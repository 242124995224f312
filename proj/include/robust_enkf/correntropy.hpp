// Gaussian kernel, weighted norms and the correntropy weight pair used by the
// robust ensemble update.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "robust_enkf/errors.hpp"
#include "robust_enkf/model.hpp"

namespace robust_enkf {

/// Kernel bandwidth σ and how it is chosen.
///   fixed    - constant σ = value
///   adaptive - σ_k recomputed every step from the innovation
///   infinite - the σ → ∞ limit; weights are forced to exactly 1
struct KernelBandwidth {
  enum class Policy { fixed, adaptive, infinite };

  Policy policy = Policy::infinite;
  double value = std::numeric_limits<double>::infinity();

  static KernelBandwidth fixed(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw DomainError("fixed kernel bandwidth must be positive and finite, got " +
                        std::to_string(sigma));
    }
    return {Policy::fixed, sigma};
  }
  static KernelBandwidth adaptive() { return {Policy::adaptive, 0.0}; }
  static KernelBandwidth infinite() { return {}; }
};

/// Correntropy weights on the observation term (l_R) and on the prior term (l_C).
struct WeightPair {
  double l_R = 1.0;
  double l_C = 1.0;
};

/// G_σ(e) = exp(-e² / 2σ²).
inline double gaussian_kernel(double e, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("gaussian_kernel: sigma must be positive");
  if (std::isinf(sigma)) return 1.0;
  return std::exp(-(e * e) / (2.0 * sigma * sigma));
}

/// ‖x‖_A = sqrt(xᵀ A⁻¹ x), via a Cholesky solve against A.
inline double weighted_norm(const VectorXd& x, const MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() != x.size()) {
    throw ConfigError("weighted_norm: dimension mismatch");
  }
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("weighted_norm: weighting matrix is not positive definite");
  }
  const VectorXd z = llt.solve(x);
  const double q = x.dot(z);
  return std::sqrt(std::max(q, 0.0));
}

/// Weight pair for the update at time k, evaluated at the prediction mean:
///   l_R = G_σ(‖y - h(m̂)‖_R)
///   l_C = G_σ(‖m̂ - m̂‖_Ĉ)
/// `sigma` must already be resolved to a number unless the policy is infinite.
/// Weights are kept strictly positive (underflow is clamped to the smallest
/// normal double).
inline WeightPair weights(const VectorXd& y, const VectorXd& m_hat, const MatrixXd& c_hat,
                          const MatrixXd& r, const StateSpaceModel& model, std::size_t k,
                          const KernelBandwidth& sigma) {
  if (sigma.policy == KernelBandwidth::Policy::infinite) return {1.0, 1.0};
  if (!(sigma.value > 0.0)) throw DomainError("weights: bandwidth must be resolved and positive");
  constexpr double kFloor = std::numeric_limits<double>::min();

  const VectorXd innovation = y - model.observe(k, m_hat);
  const VectorXd prior_offset = m_hat - m_hat;
  WeightPair w;
  w.l_R = std::max(gaussian_kernel(weighted_norm(innovation, r), sigma.value), kFloor);
  w.l_C = std::max(gaussian_kernel(weighted_norm(prior_offset, c_hat), sigma.value), kFloor);
  return w;
}

}  // namespace robust_enkf
