// Tracks a scalar random walk observed through impulsive noise with both
// engines and prints the time-averaged squared error of each.

#include <cstdio>
#include <memory>

#include "robust_enkf.hpp"

using namespace robust_enkf;

int main() {
  StateSpaceModel::Definition def;
  def.state_dim = 1;
  def.obs_dim = 1;
  def.transition = [](std::size_t, const VectorXd& x) -> VectorXd { return x; };
  def.observation = [](std::size_t, const VectorXd& x) -> VectorXd { return x; };
  def.process_cov = MatrixXd::Constant(1, 1, 0.1);
  def.obs_cov = MatrixXd::Constant(1, 1, 0.5);
  auto model = std::make_shared<const StateSpaceModel>(std::move(def));

  // Observations: nominal noise 90% of the time, 400x variance otherwise.
  const auto obs_noise = NoiseModel::mixture(model->obs_cov().matrix(),
                                             400.0 * model->obs_cov().matrix(), 0.1);
  const auto proc_noise = NoiseModel::gaussian(model->process_cov().matrix());
  const Covariance prior(MatrixXd::Identity(1, 1));

  Rng sim(7);
  const Trajectory truth = simulate(
      *model, proc_noise, obs_noise, [&](Rng& rng) { return sample_gaussian(prior, rng); }, 500,
      sim);

  FilterConfig enkf;
  enkf.ensemble_size = 50;
  enkf.seed = 7;
  FilterConfig robust = enkf;
  robust.engine = Engine::mc_enkf;
  robust.bandwidth = KernelBandwidth::fixed(2.0);

  for (const auto& [name, config] : {std::pair{"EnKF", enkf}, std::pair{"MC-EnKF", robust}}) {
    EnsembleFilter filter(model, config, prior);
    double sq = 0.0;
    for (std::size_t k = 0; k < truth.length(); ++k) {
      filter.step(truth.observations[k]);
      sq += (filter.estimate() - truth.states[k + 1]).squaredNorm();
    }
    std::printf("%-8s mse = %.4f\n", name, sq / static_cast<double>(truth.length()));
  }
  return 0;
}
