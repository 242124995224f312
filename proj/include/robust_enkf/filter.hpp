// Ensemble Kalman filter (EnKF) and maximum-correntropy EnKF (MC-EnKF).
//
// Both engines share the prediction step, the empirical moments, the
// linearization point and the perturbed-observation update. They differ only
// in the gain: the MC-EnKF rescales the prior and observation covariances by
// the correntropy weights before forming the usual Kalman gain.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "robust_enkf/correntropy.hpp"
#include "robust_enkf/errors.hpp"
#include "robust_enkf/model.hpp"
#include "robust_enkf/random.hpp"

namespace robust_enkf {

/// N state vectors stored as the columns of an n x N matrix.
class Ensemble {
 public:
  explicit Ensemble(MatrixXd members) : members_(std::move(members)) {
    if (members_.cols() < 1 || members_.rows() < 1) throw ConfigError("ensemble is empty");
    if (!members_.allFinite()) throw NumericError("ensemble has non-finite members");
  }

  static Ensemble from_members(const std::vector<VectorXd>& members) {
    if (members.empty()) throw ConfigError("ensemble is empty");
    MatrixXd m(members.front().size(), static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i].size() != m.rows()) throw ConfigError("ensemble members differ in size");
      m.col(static_cast<Eigen::Index>(i)) = members[i];
    }
    return Ensemble(std::move(m));
  }

  /// Members drawn i.i.d. from N(0, cov), in index order.
  static Ensemble sample(const Covariance& cov, std::size_t size, Rng& rng) {
    MatrixXd m(cov.dim(), static_cast<Eigen::Index>(size));
    for (Eigen::Index i = 0; i < m.cols(); ++i) m.col(i) = sample_gaussian(cov, rng);
    return Ensemble(std::move(m));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(members_.cols()); }
  Eigen::Index dim() const noexcept { return members_.rows(); }
  const MatrixXd& members() const noexcept { return members_; }
  VectorXd member(std::size_t i) const { return members_.col(static_cast<Eigen::Index>(i)); }

 private:
  MatrixXd members_;
};

enum class Engine { enkf, mc_enkf };

/// Whether the filter draws its process noise and observation perturbations.
/// `off` exists for desk checks against hand computations.
enum class Perturbation { on, off };

struct FilterConfig {
  Engine engine = Engine::enkf;
  /// Only consulted by mc_enkf.
  KernelBandwidth bandwidth = KernelBandwidth::infinite();
  std::size_t ensemble_size = 100;
  /// Relative diagonal loading, scaled by trace/dim of the regularized matrix.
  double jitter = 1e-9;
  /// Upper clamp for the adaptive bandwidth.
  double sigma_cap = 1e6;
  std::uint64_t seed = 0;
  Perturbation perturbation = Perturbation::on;
  /// Also compute ‖K̃ - K̂‖_F / ‖K̂‖_F every step (mc_enkf only).
  bool track_gain_gap = false;

  void validate() const {
    if (ensemble_size < 2) throw ConfigError("ensemble_size must be at least 2");
    if (!(jitter >= 0.0)) throw ConfigError("jitter must be nonnegative");
    if (!(sigma_cap > 0.0)) throw ConfigError("sigma_cap must be positive");
    if (engine == Engine::mc_enkf && bandwidth.policy == KernelBandwidth::Policy::fixed &&
        !(bandwidth.value > 0.0)) {
      throw ConfigError("fixed bandwidth must be positive");
    }
  }
};

struct StepDiagnostics {
  VectorXd m_hat;
  MatrixXd c_hat;
  MatrixXd H;
  MatrixXd gain;
  WeightPair weights;
  double sigma_used = std::numeric_limits<double>::infinity();
  /// ‖y_k - h_k(m̂_k)‖₂
  double innovation_norm = 0.0;
  /// NaN unless FilterConfig::track_gain_gap is set.
  double gain_gap = std::numeric_limits<double>::quiet_NaN();
};

/// x_{k|k-1}^(i) = f_k(x_{k-1|k-1}^(i)) + w_k^(i), members in index order.
inline Ensemble predict(const StateSpaceModel& model, const Ensemble& ensemble, std::size_t k,
                        Rng& rng, Perturbation perturbation = Perturbation::on) {
  if (ensemble.dim() != model.state_dim()) throw ConfigError("predict: ensemble dimension mismatch");
  MatrixXd out(ensemble.dim(), ensemble.members().cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    VectorXd x = model.transition(k, ensemble.members().col(i));
    if (perturbation == Perturbation::on) x.noalias() += sample_gaussian(model.process_cov(), rng);
    if (!x.allFinite()) {
      throw NumericError("predict: member " + std::to_string(i) + " became non-finite");
    }
    out.col(i) = x;
  }
  return Ensemble(std::move(out));
}

inline VectorXd empirical_mean(const Ensemble& ensemble) {
  return ensemble.members().rowwise().mean();
}

/// Sample covariance with divisor N - 1, symmetrized.
inline MatrixXd empirical_cov(const Ensemble& ensemble, const VectorXd& mean) {
  if (ensemble.size() < 2) throw ConfigError("empirical_cov: need at least two members");
  const MatrixXd centered = ensemble.members().colwise() - mean;
  MatrixXd cov = (centered * centered.transpose()) / static_cast<double>(ensemble.size() - 1);
  return 0.5 * (cov + cov.transpose());
}

/// A + jitter·(trace(A)/dim)·I. A zero trace falls back to a unit scale.
inline MatrixXd regularize(const MatrixXd& a, double jitter) {
  if (jitter == 0.0) return a;
  const double mean_diag = a.trace() / static_cast<double>(a.rows());
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  MatrixXd out = a;
  out.diagonal().array() += jitter * scale;
  return out;
}

/// K̂ = Ĉ Hᵀ (H Ĉ Hᵀ + R)⁻¹, without forming the inverse.
inline MatrixXd enkf_gain(const MatrixXd& c_hat, const MatrixXd& H, const MatrixXd& r,
                          double jitter) {
  if (c_hat.rows() != H.cols() || r.rows() != H.rows()) {
    throw ConfigError("enkf_gain: dimension mismatch");
  }
  const MatrixXd hc = H * c_hat;  // H Ĉ, and (Ĉ Hᵀ)ᵀ since Ĉ is symmetric
  MatrixXd innovation_cov = hc * H.transpose() + r;
  innovation_cov = regularize(0.5 * (innovation_cov + innovation_cov.transpose()), jitter);
  Eigen::LLT<MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success || !innovation_cov.allFinite()) {
    throw SingularityError("enkf_gain: innovation covariance is not positive definite");
  }
  // S Kᵀ = H Ĉ
  return llt.solve(hc).transpose();
}

/// K̃ = (l_C Ĉ⁻¹ + Hᵀ l_R R⁻¹ H)⁻¹ Hᵀ l_R R⁻¹, evaluated as the ordinary gain
/// for the effective covariances Ĉ/l_C and R/l_R. The gain is invariant to a
/// common rescaling of both covariances, so both are multiplied by
/// min(l_C, l_R) first; a vanishing l_R then drives the gain to zero instead
/// of overflowing R/l_R.
inline MatrixXd mc_gain(const MatrixXd& c_hat, const MatrixXd& H, const MatrixXd& r,
                        const WeightPair& w, double jitter) {
  if (!(w.l_R > 0.0 && w.l_R <= 1.0 && w.l_C > 0.0 && w.l_C <= 1.0)) {
    throw DomainError("mc_gain: weights must lie in (0, 1]");
  }
  const double common = std::min(w.l_R, w.l_C);
  const double prior_scale = common / w.l_C;
  const double obs_scale = common / w.l_R;
  if (prior_scale == 1.0 && obs_scale == 1.0) return enkf_gain(c_hat, H, r, jitter);
  return enkf_gain(c_hat * prior_scale, H, r * obs_scale, jitter);
}

/// x^(i) + K (y + v^(i) - h_k(x^(i))), v^(i) ~ N(0, R) drawn in member order.
inline Ensemble stochastic_update(const Ensemble& ensemble, const VectorXd& y,
                                  const StateSpaceModel& model, std::size_t k,
                                  const MatrixXd& gain, Rng& rng,
                                  Perturbation perturbation = Perturbation::on) {
  if (y.size() != model.obs_dim()) throw ConfigError("update: observation has wrong size");
  if (gain.rows() != ensemble.dim() || gain.cols() != model.obs_dim()) {
    throw ConfigError("update: gain has wrong shape");
  }
  MatrixXd out(ensemble.dim(), ensemble.members().cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    VectorXd x = ensemble.members().col(i);
    VectorXd innovation = y - model.observe(k, x);
    if (perturbation == Perturbation::on) innovation.noalias() += sample_gaussian(model.obs_cov(), rng);
    x.noalias() += gain * innovation;
    if (!x.allFinite()) {
      throw NumericError("update: member " + std::to_string(i) + " became non-finite");
    }
    out.col(i) = x;
  }
  return Ensemble(std::move(out));
}

/// EnKF analysis; `diag.gain` must hold K̂.
inline Ensemble update_enkf(const Ensemble& ensemble, const VectorXd& y,
                            const StateSpaceModel& model, std::size_t k,
                            const StepDiagnostics& diag, Rng& rng,
                            Perturbation perturbation = Perturbation::on) {
  return stochastic_update(ensemble, y, model, k, diag.gain, rng, perturbation);
}

/// MC-EnKF analysis; `diag.gain` must hold K̃. Draw order matches update_enkf.
inline Ensemble update_mc(const Ensemble& ensemble, const VectorXd& y,
                          const StateSpaceModel& model, std::size_t k,
                          const StepDiagnostics& diag, Rng& rng,
                          Perturbation perturbation = Perturbation::on) {
  return stochastic_update(ensemble, y, model, k, diag.gain, rng, perturbation);
}

/// σ_k = 1 / ‖y - h_k(m̂)‖₂, clamped to `cap`.
inline double adaptive_sigma(const VectorXd& y, const VectorXd& m_hat,
                             const StateSpaceModel& model, std::size_t k, double cap) {
  const double residual = (y - model.observe(k, m_hat)).norm();
  if (residual * cap < 1.0) return cap;
  return 1.0 / residual;
}

/// One EnKF or MC-EnKF instance. Single writer: step() mutates the ensemble
/// and the generator.
class EnsembleFilter {
 public:
  /// Initial ensemble drawn i.i.d. from N(0, prior).
  EnsembleFilter(std::shared_ptr<const StateSpaceModel> model, FilterConfig config,
                 const Covariance& prior)
      : model_(std::move(model)), config_(config), rng_(config.seed, kFilterStream) {
    config_.validate();
    if (prior.dim() != model_->state_dim()) throw ConfigError("prior has wrong dimension");
    ensemble_ = Ensemble::sample(prior, config_.ensemble_size, rng_);
  }

  EnsembleFilter(std::shared_ptr<const StateSpaceModel> model, FilterConfig config,
                 Ensemble initial)
      : model_(std::move(model)), config_(config), rng_(config.seed, kFilterStream),
        ensemble_(std::move(initial)) {
    config_.ensemble_size = ensemble_->size();
    config_.validate();
    if (ensemble_->dim() != model_->state_dim()) throw ConfigError("ensemble has wrong dimension");
  }

  /// Assimilates y_k for k = steps_taken() + 1.
  StepDiagnostics step(const VectorXd& y) {
    const std::size_t k = k_ + 1;
    try {
      StepDiagnostics diag = analyse(y, k);
      k_ = k;
      return diag;
    } catch (const Error& e) {
      throw StepError("step " + std::to_string(k) + ": " + e.what(), k);
    }
  }

  /// Mean of the updated ensemble.
  VectorXd estimate() const { return empirical_mean(*ensemble_); }

  const Ensemble& ensemble() const { return *ensemble_; }
  const FilterConfig& config() const noexcept { return config_; }
  std::size_t steps_taken() const noexcept { return k_; }

 private:
  StepDiagnostics analyse(const VectorXd& y, std::size_t k) {
    const StateSpaceModel& model = *model_;
    const MatrixXd& r = model.obs_cov().matrix();

    Ensemble predicted = predict(model, *ensemble_, k, rng_, config_.perturbation);

    StepDiagnostics diag;
    diag.m_hat = empirical_mean(predicted);
    diag.c_hat = empirical_cov(predicted, diag.m_hat);
    diag.H = jacobian_h(model, k, diag.m_hat);
    const VectorXd predicted_obs = model.observe(k, diag.m_hat);
    diag.innovation_norm = (y - predicted_obs).norm();

    if (config_.engine == Engine::enkf) {
      diag.gain = enkf_gain(diag.c_hat, diag.H, r, config_.jitter);
      ensemble_ = update_enkf(predicted, y, model, k, diag, rng_, config_.perturbation);
      return diag;
    }

    KernelBandwidth sigma = config_.bandwidth;
    if (sigma.policy == KernelBandwidth::Policy::adaptive) {
      sigma.value = adaptive_sigma(y, diag.m_hat, model, k, config_.sigma_cap);
    }
    diag.sigma_used = sigma.value;
    diag.weights =
        weights(y, diag.m_hat, regularize(diag.c_hat, config_.jitter), r, model, k, sigma);
    diag.gain = mc_gain(diag.c_hat, diag.H, r, diag.weights, config_.jitter);
    if (config_.track_gain_gap) {
      const MatrixXd reference = enkf_gain(diag.c_hat, diag.H, r, config_.jitter);
      const double ref_norm = reference.norm();
      diag.gain_gap = ref_norm > 0.0 ? (diag.gain - reference).norm() / ref_norm : 0.0;
    }
    ensemble_ = update_mc(predicted, y, model, k, diag, rng_, config_.perturbation);
    return diag;
  }

  std::shared_ptr<const StateSpaceModel> model_;
  FilterConfig config_;
  Rng rng_;
  std::optional<Ensemble> ensemble_;
  std::size_t k_ = 0;
};

}  // namespace robust_enkf
