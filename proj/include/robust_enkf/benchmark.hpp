// Benchmark systems and the Monte Carlo harness comparing filter engines.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "robust_enkf/correntropy.hpp"
#include "robust_enkf/errors.hpp"
#include "robust_enkf/filter.hpp"
#include "robust_enkf/model.hpp"
#include "robust_enkf/random.hpp"

namespace robust_enkf {

/// A filter configuration under a display label.
struct EngineSpec {
  std::string label;
  FilterConfig config;
};

inline EngineSpec enkf_engine(std::size_t ensemble_size = 100) {
  FilterConfig c;
  c.engine = Engine::enkf;
  c.ensemble_size = ensemble_size;
  return {"EnKF", c};
}

inline EngineSpec mc_engine(KernelBandwidth bandwidth, std::size_t ensemble_size = 100) {
  FilterConfig c;
  c.engine = Engine::mc_enkf;
  c.bandwidth = bandwidth;
  c.ensemble_size = ensemble_size;
  std::string label;
  switch (bandwidth.policy) {
    case KernelBandwidth::Policy::adaptive:
      label = "MC-EnKF-Ada";
      break;
    case KernelBandwidth::Policy::infinite:
      label = "MC-EnKF (sigma=inf)";
      break;
    case KernelBandwidth::Policy::fixed: {
      std::ostringstream os;
      os << "MC-EnKF (sigma=" << bandwidth.value << ")";
      label = os.str();
      break;
    }
  }
  return {label, c};
}

struct BenchmarkSpec {
  std::string name;
  std::shared_ptr<const StateSpaceModel> model;
  /// True observation noise used by the simulator (the filters only see R).
  /// A disengaged noise model simulates that term noiselessly.
  std::optional<NoiseModel> obs_noise;
  std::optional<NoiseModel> proc_noise;
  /// Prior of x_0 and of the initial ensemble.
  MatrixXd x0_cov;
  std::size_t steps = 1000;
  std::size_t runs = 100;
  std::vector<EngineSpec> engines;

  void validate() const {
    if (!model) throw ConfigError("benchmark has no model");
    if (steps < 1) throw ConfigError("benchmark needs at least one step");
    if (runs < 1) throw ConfigError("benchmark needs at least one run");
    if (engines.empty()) throw ConfigError("benchmark has no engines");
    if (x0_cov.rows() != model->state_dim()) throw ConfigError("x0 covariance has wrong size");
    for (const auto& e : engines) e.config.validate();
  }
};

/// EnKF, adaptive MC-EnKF and MC-EnKF over the usual bandwidth grid.
inline std::vector<EngineSpec> table_engines(std::size_t ensemble_size = 100) {
  std::vector<EngineSpec> engines{enkf_engine(ensemble_size),
                                  mc_engine(KernelBandwidth::adaptive(), ensemble_size)};
  for (double sigma : {0.1, 0.5, 2.0, 5.0, 10.0, 10000.0}) {
    engines.push_back(mc_engine(KernelBandwidth::fixed(sigma), ensemble_size));
  }
  return engines;
}

/// 2-D rotation by π/18 observed through H = [1 1].
///   Q = 0.01 I₂, nominal R = 0.01,
///   v ~ 0.9 N(0, 0.01) + 0.1 N(0, 1), x₀ ~ N(0, I₂).
inline BenchmarkSpec linear_benchmark() {
  const double alpha = std::numbers::pi / 18.0;
  MatrixXd rotation(2, 2);
  rotation << std::cos(alpha), std::sin(alpha), -std::sin(alpha), std::cos(alpha);
  MatrixXd h(1, 2);
  h << 1.0, 1.0;
  const MatrixXd q = 0.01 * MatrixXd::Identity(2, 2);
  const MatrixXd r = 0.01 * MatrixXd::Identity(1, 1);

  StateSpaceModel::Definition def;
  def.state_dim = 2;
  def.obs_dim = 1;
  def.transition = [rotation](std::size_t, const VectorXd& x) -> VectorXd { return rotation * x; };
  def.observation = [h](std::size_t, const VectorXd& x) -> VectorXd { return h * x; };
  def.jacobian = JacobianMap([h](std::size_t, const VectorXd&) -> MatrixXd { return h; });
  def.process_cov = q;
  def.obs_cov = r;

  BenchmarkSpec spec{
      .name = "linear",
      .model = std::make_shared<const StateSpaceModel>(std::move(def)),
      .obs_noise = NoiseModel::mixture(r, 100.0 * r, 0.1),
      .proc_noise = NoiseModel::gaussian(q),
      .x0_cov = MatrixXd::Identity(2, 2),
  };
  spec.engines = table_engines();
  return spec;
}

/// x_k = (I + κ₁ [-1 0.2; 0.2 -1]) x_{k-1} + κ₂ cos(x_{k-1}) + w_k
/// y_k = x_k + sin(x_k) + v_k
/// with κ₁ = κ₂ = 0.1, Q = I₂, nominal R = I₂,
/// v ~ 0.9 N(0, I₂) + 0.1 N(0, 1000 I₂), x₀ ~ N(0, I₂).
inline BenchmarkSpec nonlinear_benchmark() {
  constexpr double kappa1 = 0.1;
  const double kappa2 = 0.1;
  MatrixXd coupling(2, 2);
  coupling << -1.0, 0.2, 0.2, -1.0;
  const MatrixXd a = MatrixXd::Identity(2, 2) + kappa1 * coupling;
  const MatrixXd q = MatrixXd::Identity(2, 2);
  const MatrixXd r = MatrixXd::Identity(2, 2);

  StateSpaceModel::Definition def;
  def.state_dim = 2;
  def.obs_dim = 2;
  def.transition = [a, kappa2](std::size_t, const VectorXd& x) -> VectorXd {
    return a * x + kappa2 * x.array().cos().matrix();
  };
  def.observation = [](std::size_t, const VectorXd& x) -> VectorXd {
    return x + x.array().sin().matrix();
  };
  def.jacobian = JacobianMap([](std::size_t, const VectorXd& x) -> MatrixXd {
    return (1.0 + x.array().cos()).matrix().asDiagonal();
  });
  def.process_cov = q;
  def.obs_cov = r;

  BenchmarkSpec spec{
      .name = "nonlinear",
      .model = std::make_shared<const StateSpaceModel>(std::move(def)),
      .obs_noise = NoiseModel::mixture(r, 1000.0 * r, 0.1),
      .proc_noise = NoiseModel::gaussian(q),
      .x0_cov = MatrixXd::Identity(2, 2),
  };
  spec.engines = table_engines();
  return spec;
}

/// (1/N) Σ_k ‖x̂_k - x_k‖₂²
inline double mse(const std::vector<VectorXd>& estimates, const std::vector<VectorXd>& truth) {
  if (estimates.size() != truth.size()) throw ConfigError("mse: length mismatch");
  if (estimates.empty()) throw ConfigError("mse: empty sequence");
  double total = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (estimates[k].size() != truth[k].size()) throw ConfigError("mse: dimension mismatch");
    total += (estimates[k] - truth[k]).squaredNorm();
  }
  return total / static_cast<double>(estimates.size());
}

struct EngineResult {
  std::string label;
  double mse = 0.0;
  double cpu_seconds = 0.0;
  /// Mean per-step ‖K̃ - K̂‖_F / ‖K̂‖_F; NaN unless gain gaps were tracked.
  double gain_gap = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> run_mse;
  std::vector<double> run_seconds;
};

/// Truth x_1..x_N and each engine's estimate sequence for a single run.
struct TrajectoryRecord {
  std::vector<VectorXd> truth;
  std::vector<std::string> labels;
  std::vector<std::vector<VectorXd>> estimates;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<EngineResult> per_engine;
  std::optional<TrajectoryRecord> trajectory;

  const EngineResult& engine(const std::string& label) const {
    for (const auto& e : per_engine) {
      if (e.label == label) return e;
    }
    throw ConfigError("no engine labelled '" + label + "'");
  }
};

struct RunOptions {
  bool parallel = true;
  /// Keep the trajectories of run 0.
  bool capture_trajectory = false;
  /// 0 = std::thread::hardware_concurrency().
  unsigned threads = 0;
};

/// One engine on one simulated trajectory.
struct EngineRun {
  double mse = 0.0;
  double seconds = 0.0;
  double gain_gap = 0.0;
  std::vector<VectorXd> estimates;
};

namespace detail {

inline EngineRun run_engine(const BenchmarkSpec& spec, const Covariance& prior,
                            const EngineSpec& engine, const Trajectory& traj, std::uint64_t seed,
                            bool keep_estimates) {
  FilterConfig config = engine.config;
  config.seed = seed;
  EnsembleFilter filter(spec.model, config, prior);

  EngineRun out;
  std::vector<VectorXd> estimates;
  estimates.reserve(traj.length());
  double gap_sum = 0.0;

  const auto start = std::chrono::steady_clock::now();
  for (const VectorXd& y : traj.observations) {
    const StepDiagnostics diag = filter.step(y);
    if (config.track_gain_gap) gap_sum += diag.gain_gap;
    estimates.push_back(filter.estimate());
  }
  const auto stop = std::chrono::steady_clock::now();

  out.seconds = std::chrono::duration<double>(stop - start).count();
  const std::vector<VectorXd> truth(traj.states.begin() + 1, traj.states.end());
  out.mse = mse(estimates, truth);
  out.gain_gap = config.track_gain_gap ? gap_sum / static_cast<double>(traj.length())
                                       : std::numeric_limits<double>::quiet_NaN();
  if (keep_estimates) out.estimates = std::move(estimates);
  return out;
}

}  // namespace detail

/// Simulates the truth and observations of one run from `seed`, then runs
/// every engine on that same observation sequence (serially, in list order).
/// Engines share the seed, so they also start from the same initial ensemble.
inline std::vector<EngineRun> run_single(const BenchmarkSpec& spec, std::uint64_t seed,
                                         bool keep_estimates, Trajectory* traj_out = nullptr) {
  const Covariance prior(spec.x0_cov, "x0 covariance");
  Rng sim_rng(seed, kSimulationStream);
  Trajectory traj = simulate(
      *spec.model, spec.proc_noise, spec.obs_noise,
      [&prior](Rng& rng) { return sample_gaussian(prior, rng); }, spec.steps, sim_rng);

  std::vector<EngineRun> results;
  results.reserve(spec.engines.size());
  for (const auto& engine : spec.engines) {
    results.push_back(detail::run_engine(spec, prior, engine, traj, seed, keep_estimates));
  }
  if (traj_out) *traj_out = std::move(traj);
  return results;
}

/// Monte Carlo comparison. Results depend only on (spec, base_seed); run
/// order and thread count affect timings only.
inline RunResult run_benchmark(const BenchmarkSpec& spec, std::uint64_t base_seed,
                               const RunOptions& options = {}) {
  spec.validate();
  const std::size_t runs = spec.runs;
  std::vector<std::vector<EngineRun>> per_run(runs);
  Trajectory first_traj;

  auto do_run = [&](std::size_t r) {
    try {
      per_run[r] = run_single(spec, base_seed + r, options.capture_trajectory && r == 0,
                              r == 0 ? &first_traj : nullptr);
    } catch (const StepError& e) {
      throw StepError("run " + std::to_string(r) + ", " + e.what(), e.step(),
                      static_cast<long>(r));
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs)));
  if (!options.parallel || threads == 1) {
    for (std::size_t r = 0; r < runs; ++r) do_run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < runs; r = next++) {
          try {
            do_run(r);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = runs;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  RunResult result;
  result.seed = base_seed;
  for (std::size_t e = 0; e < spec.engines.size(); ++e) {
    EngineResult agg;
    agg.label = spec.engines[e].label;
    double mse_sum = 0.0;
    double time_sum = 0.0;
    double gap_sum = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& one = per_run[r][e];
      agg.run_mse.push_back(one.mse);
      agg.run_seconds.push_back(one.seconds);
      mse_sum += one.mse;
      time_sum += one.seconds;
      gap_sum += one.gain_gap;
    }
    agg.mse = mse_sum / static_cast<double>(runs);
    agg.cpu_seconds = time_sum / static_cast<double>(runs);
    agg.gain_gap = gap_sum / static_cast<double>(runs);
    result.per_engine.push_back(std::move(agg));
  }

  if (options.capture_trajectory) {
    TrajectoryRecord rec;
    rec.truth.assign(first_traj.states.begin() + 1, first_traj.states.end());
    for (std::size_t e = 0; e < spec.engines.size(); ++e) {
      rec.labels.push_back(spec.engines[e].label);
      rec.estimates.push_back(std::move(per_run[0][e].estimates));
    }
    result.trajectory = std::move(rec);
  }
  return result;
}

}  // namespace robust_enkf
