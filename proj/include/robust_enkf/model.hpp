// State-space model, noise samplers and ground-truth simulation.
//
//   x_k = f_k(x_{k-1}) + w_k
//   y_k = h_k(x_k)     + v_k
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "robust_enkf/errors.hpp"
#include "robust_enkf/random.hpp"

namespace robust_enkf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Lower-triangular factor L with L·Lᵀ = cov. Throws FactorizationError
/// naming `name` when cov is not symmetric positive definite.
inline MatrixXd cholesky_lower(const MatrixXd& cov, const std::string& name = "covariance") {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw FactorizationError(name + ": expected a non-empty square matrix, got " +
                             std::to_string(cov.rows()) + "x" + std::to_string(cov.cols()));
  }
  if (!cov.allFinite()) throw FactorizationError(name + ": matrix has non-finite entries");
  const double scale = cov.cwiseAbs().maxCoeff();
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw FactorizationError(name + ": matrix is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(name + ": matrix is not positive definite");
  }
  return llt.matrixL();
}

/// An SPD covariance together with its Cholesky factor, validated once.
class Covariance {
 public:
  explicit Covariance(MatrixXd cov, const std::string& name = "covariance")
      : matrix_(std::move(cov)), lower_(cholesky_lower(matrix_, name)) {}

  const MatrixXd& matrix() const noexcept { return matrix_; }
  const MatrixXd& lower() const noexcept { return lower_; }
  Eigen::Index dim() const noexcept { return matrix_.rows(); }

 private:
  MatrixXd matrix_;
  MatrixXd lower_;
};

/// z = L·u with u standard normal.
inline VectorXd sample_gaussian(const Covariance& cov, Rng& rng) {
  return cov.lower() * rng.standard_normal(cov.dim());
}

inline VectorXd sample_gaussian(const MatrixXd& cov, Rng& rng) {
  return sample_gaussian(Covariance(cov), rng);
}

/// Zero-mean Gaussian or two-component Gaussian mixture
/// (1-ε)·N(0, primary) + ε·N(0, outlier).
class NoiseModel {
 public:
  enum class Kind { gaussian, gaussian_mixture };

  static NoiseModel gaussian(const MatrixXd& cov) {
    return NoiseModel(Kind::gaussian, Covariance(cov, "noise covariance"), std::nullopt, 0.0);
  }

  static NoiseModel mixture(const MatrixXd& primary, const MatrixXd& outlier,
                            double outlier_prob) {
    if (!(outlier_prob >= 0.0 && outlier_prob <= 1.0)) {
      throw ConfigError("outlier probability must lie in [0, 1], got " +
                        std::to_string(outlier_prob));
    }
    if (primary.rows() != outlier.rows()) {
      throw ConfigError("mixture components have different dimensions");
    }
    return NoiseModel(Kind::gaussian_mixture, Covariance(primary, "primary noise covariance"),
                      Covariance(outlier, "outlier noise covariance"), outlier_prob);
  }

  Kind kind() const noexcept { return kind_; }
  const Covariance& primary() const noexcept { return primary_; }
  /// Only valid for gaussian_mixture.
  const Covariance& outlier() const { return outlier_.value(); }
  double outlier_prob() const noexcept { return outlier_prob_; }
  Eigen::Index dim() const noexcept { return primary_.dim(); }

  /// Covariance of the full distribution, (1-ε)·primary + ε·outlier.
  MatrixXd covariance() const {
    if (kind_ == Kind::gaussian) return primary_.matrix();
    return (1.0 - outlier_prob_) * primary_.matrix() + outlier_prob_ * outlier_->matrix();
  }

  /// Draw used by the simulator. A mixture with ε = 0 takes the Gaussian path
  /// (no component indicator is consumed), so it replays a plain Gaussian
  /// model bit for bit.
  VectorXd sample(Rng& rng, bool* from_outlier = nullptr) const;

 private:
  NoiseModel(Kind kind, Covariance primary, std::optional<Covariance> outlier, double prob)
      : kind_(kind), primary_(std::move(primary)), outlier_(std::move(outlier)),
        outlier_prob_(prob) {}

  Kind kind_;
  Covariance primary_;
  std::optional<Covariance> outlier_;
  double outlier_prob_;
};

/// One uniform for the component indicator, then the Gaussian draw.
inline VectorXd sample_mixture(const NoiseModel& noise, Rng& rng, bool* from_outlier = nullptr) {
  if (noise.kind() != NoiseModel::Kind::gaussian_mixture) {
    throw ConfigError("sample_mixture requires a gaussian_mixture noise model");
  }
  const bool outlier = rng.uniform() < noise.outlier_prob();
  if (from_outlier) *from_outlier = outlier;
  return sample_gaussian(outlier ? noise.outlier() : noise.primary(), rng);
}

inline VectorXd NoiseModel::sample(Rng& rng, bool* from_outlier) const {
  if (kind_ == Kind::gaussian_mixture && outlier_prob_ > 0.0) {
    return sample_mixture(*this, rng, from_outlier);
  }
  if (from_outlier) *from_outlier = false;
  return sample_gaussian(primary_, rng);
}

using VectorMap = std::function<VectorXd(std::size_t k, const VectorXd& x)>;
using JacobianMap = std::function<MatrixXd(std::size_t k, const VectorXd& x)>;

/// Central differences with per-coordinate step relative_step·(1 + |x_j|).
struct FiniteDifference {
  double relative_step = 1e-6;
};

using JacobianSource = std::variant<JacobianMap, FiniteDifference>;

class StateSpaceModel {
 public:
  struct Definition {
    Eigen::Index state_dim = 0;
    Eigen::Index obs_dim = 0;
    VectorMap transition;
    VectorMap observation;
    MatrixXd process_cov;
    MatrixXd obs_cov;
    JacobianSource jacobian = FiniteDifference{};
  };

  explicit StateSpaceModel(Definition def)
      : n_(def.state_dim),
        m_(def.obs_dim),
        transition_(std::move(def.transition)),
        observation_(std::move(def.observation)),
        process_cov_(std::move(def.process_cov), "process covariance Q"),
        obs_cov_(std::move(def.obs_cov), "nominal observation covariance R"),
        jacobian_(std::move(def.jacobian)) {
    if (n_ <= 0 || m_ <= 0) throw ConfigError("state and observation dimensions must be positive");
    if (!transition_ || !observation_) throw ConfigError("transition and observation are required");
    if (process_cov_.dim() != n_) throw ConfigError("process covariance must be n x n");
    if (obs_cov_.dim() != m_) throw ConfigError("observation covariance must be m x m");
    if (auto* fn = std::get_if<JacobianMap>(&jacobian_); fn && !*fn) {
      throw ConfigError("analytic Jacobian is empty");
    }
  }

  Eigen::Index state_dim() const noexcept { return n_; }
  Eigen::Index obs_dim() const noexcept { return m_; }
  const Covariance& process_cov() const noexcept { return process_cov_; }
  const Covariance& obs_cov() const noexcept { return obs_cov_; }
  const JacobianSource& jacobian_source() const noexcept { return jacobian_; }

  VectorXd transition(std::size_t k, const VectorXd& x) const {
    VectorXd out = transition_(k, x);
    if (out.size() != n_) throw ConfigError("transition returned a vector of wrong size");
    return out;
  }

  VectorXd observe(std::size_t k, const VectorXd& x) const {
    VectorXd out = observation_(k, x);
    if (out.size() != m_) throw ConfigError("observation returned a vector of wrong size");
    return out;
  }

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  VectorMap transition_;
  VectorMap observation_;
  Covariance process_cov_;
  Covariance obs_cov_;
  JacobianSource jacobian_;
};

inline MatrixXd finite_difference_jacobian(const StateSpaceModel& model, std::size_t k,
                                           const VectorXd& x, double relative_step) {
  MatrixXd jac(model.obs_dim(), model.state_dim());
  VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double delta = relative_step * (1.0 + std::abs(x(j)));
    probe(j) = x(j) + delta;
    const VectorXd up = model.observe(k, probe);
    probe(j) = x(j) - delta;
    const VectorXd down = model.observe(k, probe);
    probe(j) = x(j);
    jac.col(j) = (up - down) / (2.0 * delta);
  }
  return jac;
}

/// H_k = ∂h_k/∂x evaluated at x.
inline MatrixXd jacobian_h(const StateSpaceModel& model, std::size_t k, const VectorXd& x) {
  if (x.size() != model.state_dim()) throw ConfigError("jacobian_h: state has wrong size");
  if (!x.allFinite()) throw NumericError("jacobian_h: evaluation point is not finite");
  MatrixXd jac = std::visit(
      [&](const auto& source) -> MatrixXd {
        using T = std::decay_t<decltype(source)>;
        if constexpr (std::is_same_v<T, JacobianMap>) {
          return source(k, x);
        } else {
          return finite_difference_jacobian(model, k, x, source.relative_step);
        }
      },
      model.jacobian_source());
  if (jac.rows() != model.obs_dim() || jac.cols() != model.state_dim()) {
    throw ConfigError("jacobian_h: Jacobian has wrong shape");
  }
  if (!jac.allFinite()) throw NumericError("jacobian_h: Jacobian has non-finite entries");
  return jac;
}

/// Ground truth x_0..x_N and observations y_1..y_N.
struct Trajectory {
  std::vector<VectorXd> states;
  std::vector<VectorXd> observations;
  /// outlier_flags[k-1] is true when v_k came from the outlier component.
  std::vector<bool> outlier_flags;

  std::size_t length() const noexcept { return observations.size(); }
};

using InitialSampler = std::function<VectorXd(Rng&)>;

/// Runs the model forward. A disengaged noise model means that noise term is
/// skipped (the noiseless limit). Draw order per step: w_k, then v_k.
inline Trajectory simulate(const StateSpaceModel& model, const std::optional<NoiseModel>& noise_w,
                           const std::optional<NoiseModel>& noise_v,
                           const InitialSampler& x0_sampler, std::size_t steps, Rng& rng) {
  if (steps < 1) throw ConfigError("simulate: need at least one step");
  if (noise_w && noise_w->dim() != model.state_dim()) {
    throw ConfigError("simulate: process noise dimension mismatch");
  }
  if (noise_v && noise_v->dim() != model.obs_dim()) {
    throw ConfigError("simulate: observation noise dimension mismatch");
  }
  Trajectory traj;
  traj.states.reserve(steps + 1);
  traj.observations.reserve(steps);
  traj.outlier_flags.reserve(steps);

  VectorXd x = x0_sampler(rng);
  if (x.size() != model.state_dim()) throw ConfigError("simulate: x0 has wrong size");
  traj.states.push_back(x);
  for (std::size_t k = 1; k <= steps; ++k) {
    x = model.transition(k, x);
    if (noise_w) x += noise_w->sample(rng);
    VectorXd y = model.observe(k, x);
    bool outlier = false;
    if (noise_v) y += noise_v->sample(rng, &outlier);
    if (!x.allFinite() || !y.allFinite()) {
      throw NumericError("simulate: non-finite value at step " + std::to_string(k));
    }
    traj.states.push_back(x);
    traj.observations.push_back(std::move(y));
    traj.outlier_flags.push_back(outlier);
  }
  return traj;
}

}  // namespace robust_enkf
