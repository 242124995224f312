#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "robust_enkf/benchmark.hpp"
#include "robust_enkf/report.hpp"

using namespace robust_enkf;

namespace {

std::shared_ptr<const StateSpaceModel> scalar_identity() {
  StateSpaceModel::Definition def;
  def.state_dim = 1;
  def.obs_dim = 1;
  def.transition = [](std::size_t, const VectorXd& x) -> VectorXd { return x; };
  def.observation = [](std::size_t, const VectorXd& x) -> VectorXd { return x; };
  def.process_cov = MatrixXd::Identity(1, 1);
  def.obs_cov = MatrixXd::Identity(1, 1);
  return std::make_shared<const StateSpaceModel>(std::move(def));
}

BenchmarkSpec small(BenchmarkSpec spec, std::size_t runs, std::size_t steps) {
  spec.runs = runs;
  spec.steps = steps;
  return spec;
}

}  // namespace

TEST(Benchmarks, LinearConstants) {
  const auto spec = linear_benchmark();
  const double alpha = std::numbers::pi / 18.0;
  const VectorXd x{{1.0, 0.0}};
  const VectorXd fx = spec.model->transition(1, x);
  EXPECT_NEAR(fx(0), std::cos(alpha), 1e-15);
  EXPECT_NEAR(fx(1), -std::sin(alpha), 1e-15);
  EXPECT_EQ(spec.model->observe(1, VectorXd{{2.0, 3.0}})(0), 5.0);
  EXPECT_EQ(spec.model->process_cov().matrix(), 0.01 * MatrixXd::Identity(2, 2));
  EXPECT_EQ(spec.model->obs_cov().matrix()(0, 0), 0.01);
  ASSERT_TRUE(spec.obs_noise);
  EXPECT_EQ(spec.obs_noise->outlier_prob(), 0.1);
  EXPECT_EQ(spec.x0_cov, MatrixXd::Identity(2, 2));
  EXPECT_EQ(spec.steps, 1000u);
  EXPECT_EQ(spec.runs, 100u);
}

TEST(Benchmarks, NonlinearConstants) {
  const auto spec = nonlinear_benchmark();
  const VectorXd x{{0.3, -1.2}};
  const MatrixXd a = (MatrixXd(2, 2) << 0.9, 0.02, 0.02, 0.9).finished();
  const VectorXd expected = a * x + 0.1 * x.array().cos().matrix();
  EXPECT_LT((spec.model->transition(1, x) - expected).norm(), 1e-15);
  const VectorXd y = spec.model->observe(1, x);
  EXPECT_NEAR(y(0), 0.3 + std::sin(0.3), 1e-15);
  EXPECT_NEAR(y(1), -1.2 + std::sin(-1.2), 1e-15);
  const MatrixXd jac = jacobian_h(*spec.model, 1, x);
  EXPECT_NEAR(jac(0, 0), 1.0 + std::cos(0.3), 1e-15);
  EXPECT_EQ(jac(0, 1), 0.0);
  EXPECT_EQ(spec.model->obs_cov().matrix(), MatrixXd::Identity(2, 2));
  EXPECT_EQ(spec.obs_noise->outlier_prob(), 0.1);
}

TEST(Benchmarks, TableEngineLabels) {
  const auto engines = table_engines();
  ASSERT_EQ(engines.size(), 8u);
  EXPECT_EQ(engines[0].label, "EnKF");
  EXPECT_EQ(engines[1].label, "MC-EnKF-Ada");
  EXPECT_EQ(engines[5].label, "MC-EnKF (sigma=5)");
  EXPECT_EQ(engines[7].label, "MC-EnKF (sigma=10000)");
  for (const auto& e : engines) EXPECT_EQ(e.config.ensemble_size, 100u);
}

TEST(Mse, HandComputed) {
  EXPECT_EQ(mse({VectorXd{{1.0, 1.0}}, VectorXd{{0.0, 0.0}}},
                {VectorXd{{0.0, 0.0}}, VectorXd{{0.0, 0.0}}}),
            1.0);
  EXPECT_EQ(mse({VectorXd{{3.0}}}, {VectorXd{{3.0}}}), 0.0);
  EXPECT_EQ(mse({VectorXd{{1.0}}, VectorXd{{3.0}}}, {VectorXd{{0.0}}, VectorXd{{0.0}}}), 5.0);
  EXPECT_THROW(mse({VectorXd{{1.0}}}, {}), ConfigError);
}

TEST(RunBenchmark, DuplicatedEngineGivesIdenticalMse) {
  auto spec = small(linear_benchmark(), 3, 50);
  auto twin = enkf_engine();
  twin.label = "EnKF twin";
  spec.engines = {enkf_engine(), twin};
  const auto result = run_benchmark(spec, 11);
  EXPECT_EQ(result.engine("EnKF").mse, result.engine("EnKF twin").mse);
}

TEST(RunBenchmark, HandRolledScalarTrace) {
  const std::uint64_t seed = 21;
  const std::size_t n = 5;
  BenchmarkSpec spec{
      .name = "scalar",
      .model = scalar_identity(),
      .obs_noise = std::nullopt,
      .proc_noise = std::nullopt,
      .x0_cov = MatrixXd::Identity(1, 1),
      .steps = 3,
      .runs = 1,
  };
  EngineSpec engine = enkf_engine(n);
  engine.config.jitter = 0.0;
  engine.config.perturbation = Perturbation::off;
  spec.engines = {engine};
  const auto result = run_benchmark(spec, seed);

  // Truth is constant and observed exactly.
  Rng sim(seed, kSimulationStream);
  const double x0 = sample_gaussian(Covariance(MatrixXd::Identity(1, 1)), sim)(0);
  Rng filt(seed, kFilterStream);
  const Ensemble init = Ensemble::sample(Covariance(MatrixXd::Identity(1, 1)), n, filt);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = init.member(i)(0);
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(n);
    double c = 0.0;
    for (double v : x) c += (v - m) * (v - m);
    c /= static_cast<double>(n - 1);
    const double gain = c / (c + 1.0);
    double est = 0.0;
    for (double& v : x) {
      v += gain * (x0 - v);
      est += v;
    }
    est /= static_cast<double>(n);
    total += (est - x0) * (est - x0);
  }
  EXPECT_NEAR(result.engine("EnKF").mse, total / 3.0, 1e-12);
}

TEST(RunBenchmark, ParallelMatchesSerial) {
  auto spec = small(nonlinear_benchmark(), 6, 40);
  spec.engines = {enkf_engine(), mc_engine(KernelBandwidth::adaptive()),
                  mc_engine(KernelBandwidth::fixed(2.0))};
  RunOptions serial;
  serial.parallel = false;
  RunOptions parallel;
  parallel.threads = 4;
  const auto a = run_benchmark(spec, 5, serial);
  const auto b = run_benchmark(spec, 5, parallel);
  for (std::size_t e = 0; e < spec.engines.size(); ++e) {
    EXPECT_EQ(a.per_engine[e].mse, b.per_engine[e].mse);
    EXPECT_EQ(a.per_engine[e].run_mse, b.per_engine[e].run_mse);
  }
}

TEST(RunBenchmark, RunMseAveragesToMse) {
  auto spec = small(linear_benchmark(), 4, 30);
  spec.engines = {enkf_engine(50)};
  const auto result = run_benchmark(spec, 2);
  const auto& e = result.engine("EnKF");
  ASSERT_EQ(e.run_mse.size(), 4u);
  double sum = 0.0;
  for (double v : e.run_mse) sum += v;
  EXPECT_NEAR(e.mse, sum / 4.0, 1e-15);
}

TEST(RunBenchmark, MatchesRunSingle) {
  auto spec = small(linear_benchmark(), 2, 25);
  spec.engines = {enkf_engine(), mc_engine(KernelBandwidth::fixed(5.0))};
  const auto result = run_benchmark(spec, 100);
  const auto second = run_single(spec, 101, false);
  EXPECT_EQ(result.per_engine[1].run_mse[1], second[1].mse);
}

TEST(RunBenchmark, CapturesTrajectoryOfFirstRun) {
  auto spec = small(linear_benchmark(), 2, 20);
  spec.engines = {enkf_engine(), mc_engine(KernelBandwidth::fixed(5.0))};
  RunOptions opts;
  opts.capture_trajectory = true;
  const auto result = run_benchmark(spec, 8, opts);
  ASSERT_TRUE(result.trajectory);
  EXPECT_EQ(result.trajectory->truth.size(), 20u);
  EXPECT_EQ(result.trajectory->labels.size(), 2u);
  EXPECT_NEAR(mse(result.trajectory->estimates[0], result.trajectory->truth),
              result.per_engine[0].run_mse[0], 1e-15);

  const auto restored = report::trajectory_from_json(report::trajectory_json(*result.trajectory));
  EXPECT_EQ(restored.labels, result.trajectory->labels);
  EXPECT_EQ(restored.truth.size(), 20u);
}

TEST(RunBenchmark, RejectsInvalidSpecs) {
  auto spec = small(linear_benchmark(), 1, 10);
  spec.engines.clear();
  EXPECT_THROW(run_benchmark(spec, 1), ConfigError);
  spec = small(linear_benchmark(), 0, 10);
  EXPECT_THROW(run_benchmark(spec, 1), ConfigError);
}

TEST(RunBenchmark, FailingRunIsNamed) {
  StateSpaceModel::Definition def;
  def.state_dim = 1;
  def.obs_dim = 1;
  def.transition = [](std::size_t, const VectorXd& x) -> VectorXd { return x; };
  def.observation = [](std::size_t, const VectorXd& x) -> VectorXd { return x; };
  def.jacobian = JacobianMap([](std::size_t k, const VectorXd&) -> MatrixXd {
    return MatrixXd::Constant(1, 1, k == 4 ? std::nan("") : 1.0);
  });
  def.process_cov = MatrixXd::Identity(1, 1);
  def.obs_cov = MatrixXd::Identity(1, 1);
  BenchmarkSpec spec{
      .name = "broken",
      .model = std::make_shared<const StateSpaceModel>(std::move(def)),
      .obs_noise = std::nullopt,
      .proc_noise = std::nullopt,
      .x0_cov = MatrixXd::Identity(1, 1),
      .steps = 10,
      .runs = 2,
      .engines = {enkf_engine(10)},
  };
  RunOptions serial;
  serial.parallel = false;
  try {
    run_benchmark(spec, 3, serial);
    FAIL() << "expected StepError";
  } catch (const StepError& e) {
    EXPECT_EQ(e.run(), 0);
    EXPECT_NE(std::string(e.what()).find("run 0"), std::string::npos);
  }
}

TEST(Report, CsvHeaderAndRows) {
  RunResult r;
  r.per_engine.push_back(EngineResult{.label = "EnKF", .mse = 0.5, .cpu_seconds = 1.25});
  const std::string csv = report::results_csv(r, false);
  EXPECT_EQ(csv, "label,mse,cpu_seconds\nEnKF,0.5,0\n");
}

TEST(Report, SvgIsDeterministicAndLabelled) {
  TrajectoryRecord rec;
  rec.truth = {VectorXd{{0.0, 1.0}}, VectorXd{{1.0, 2.0}}};
  rec.labels = {"EnKF"};
  rec.estimates = {{VectorXd{{0.1, 0.9}}, VectorXd{{1.1, 2.1}}}};
  const auto a = report::trajectory_svgs(rec, "linear");
  const auto b = report::trajectory_svgs(rec, "linear");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a[0].find("True-1"), std::string::npos);
  EXPECT_NE(a[1].find("EnKF-2"), std::string::npos);
}
