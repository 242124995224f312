// Command-line front end: bench, sweep and plot subcommands.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "robust_enkf/benchmark.hpp"
#include "robust_enkf/errors.hpp"
#include "robust_enkf/report.hpp"

namespace robust_enkf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr const char* kSeedEnv = "ROBUST_ENKF_SEED";

enum class Command { bench, sweep, plot };

struct CliConfig {
  Command command = Command::bench;
  std::string benchmark = "linear";
  /// Mini-syntax `[label=]enkf | mc:<sigma> | mc:adaptive | mc:inf`.
  std::vector<std::string> engines;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> steps;
  std::size_t ensemble_size = 100;
  std::uint64_t seed = kDefaultSeed;
  std::string output_dir = "out";
  std::vector<std::string> formats{"csv", "json"};
  bool parallel = true;
  /// When false, cpu_seconds is written as 0 so outputs are byte-reproducible.
  bool timing = true;
  /// Bandwidth grid for `sweep`.
  std::vector<double> sigmas{0.1, 0.5, 2.0, 5.0, 10.0, 10000.0};
  /// `bench`: also write trajectory.json for run 0. `plot`: read this file
  /// instead of running inline.
  bool save_trajectory = false;
  std::string trajectory_file;
};

inline const char* command_name(Command c) {
  switch (c) {
    case Command::bench: return "bench";
    case Command::sweep: return "sweep";
    case Command::plot: return "plot";
  }
  return "?";
}

inline bool has_format(const CliConfig& cfg, const std::string& f) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), f) != cfg.formats.end();
}

/// Parses one engine spec; throws ConfigError on malformed input.
inline EngineSpec parse_engine(const std::string& text, std::size_t ensemble_size) {
  std::string label;
  std::string body = text;
  if (const auto eq = text.find('='); eq != std::string::npos) {
    label = text.substr(0, eq);
    body = text.substr(eq + 1);
    if (label.empty()) throw ConfigError("empty engine label in '" + text + "'");
  }
  EngineSpec spec;
  if (body == "enkf") {
    spec = enkf_engine(ensemble_size);
  } else if (body.rfind("mc:", 0) == 0) {
    const std::string arg = body.substr(3);
    if (arg == "adaptive") {
      spec = mc_engine(KernelBandwidth::adaptive(), ensemble_size);
    } else if (arg == "inf") {
      spec = mc_engine(KernelBandwidth::infinite(), ensemble_size);
    } else {
      double sigma = 0.0;
      std::size_t used = 0;
      try {
        sigma = std::stod(arg, &used);
      } catch (const std::exception&) {
        throw ConfigError("bad bandwidth in engine spec '" + text + "'");
      }
      if (used != arg.size()) throw ConfigError("bad bandwidth in engine spec '" + text + "'");
      try {
        spec = mc_engine(KernelBandwidth::fixed(sigma), ensemble_size);
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
    }
  } else {
    throw ConfigError("unknown engine spec '" + text + "' (expected enkf, mc:<sigma>, "
                      "mc:adaptive or mc:inf)");
  }
  if (!label.empty()) spec.label = label;
  return spec;
}

inline nlohmann::json engine_json(const EngineSpec& e) {
  nlohmann::json j{{"label", e.label}};
  if (e.config.engine == Engine::enkf) {
    j["engine"] = "enkf";
  } else {
    j["engine"] = "mc_enkf";
    switch (e.config.bandwidth.policy) {
      case KernelBandwidth::Policy::fixed: j["bandwidth"] = e.config.bandwidth.value; break;
      case KernelBandwidth::Policy::adaptive: j["bandwidth"] = "adaptive"; break;
      case KernelBandwidth::Policy::infinite: j["bandwidth"] = "inf"; break;
    }
    j["sigma_cap"] = e.config.sigma_cap;
  }
  j["ensemble_size"] = e.config.ensemble_size;
  j["jitter"] = e.config.jitter;
  return j;
}

/// Benchmark with CLI overrides applied. Throws ConfigError.
inline BenchmarkSpec resolve_benchmark(const CliConfig& cfg, std::size_t default_runs,
                                       const std::vector<std::string>& default_engines) {
  BenchmarkSpec spec = [&] {
    if (cfg.benchmark == "linear") return linear_benchmark();
    if (cfg.benchmark == "nonlinear") return nonlinear_benchmark();
    throw ConfigError("unknown benchmark '" + cfg.benchmark + "' (expected linear or nonlinear)");
  }();
  if (cfg.ensemble_size < 2) throw ConfigError("--ensemble-size must be at least 2");
  spec.runs = cfg.runs.value_or(default_runs);
  spec.steps = cfg.steps.value_or(spec.steps);
  if (spec.runs < 1) throw ConfigError("--runs must be at least 1");
  if (spec.steps < 1) throw ConfigError("--steps must be at least 1");

  const auto& texts = cfg.engines.empty() ? default_engines : cfg.engines;
  spec.engines.clear();
  if (texts.empty()) {
    spec.engines = table_engines(cfg.ensemble_size);
  } else {
    for (const auto& t : texts) spec.engines.push_back(parse_engine(t, cfg.ensemble_size));
  }
  if (spec.engines.empty()) throw ConfigError("at least one engine is required");
  for (std::size_t i = 0; i < spec.engines.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.engines.size(); ++j) {
      if (spec.engines[i].label == spec.engines[j].label) {
        throw ConfigError("duplicate engine label '" + spec.engines[i].label + "'");
      }
    }
  }
  return spec;
}

inline nlohmann::json config_json(const CliConfig& cfg, const BenchmarkSpec& spec) {
  nlohmann::json engines = nlohmann::json::array();
  for (const auto& e : spec.engines) engines.push_back(engine_json(e));
  return {{"command", command_name(cfg.command)},
          {"benchmark", spec.name},
          {"engines", engines},
          {"runs", spec.runs},
          {"steps", spec.steps},
          {"ensemble_size", cfg.ensemble_size},
          {"seed", cfg.seed},
          {"parallel", cfg.parallel},
          {"timing", cfg.timing},
          {"formats", cfg.formats}};
}

inline std::filesystem::path prepare_output_dir(const CliConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + cfg.output_dir + "'");
  }
  return dir;
}

namespace detail {

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

inline RunOptions run_options(const CliConfig& cfg, bool capture) {
  RunOptions o;
  o.parallel = cfg.parallel;
  o.capture_trajectory = capture;
  return o;
}

}  // namespace detail

/// Writes results.csv / results.json (and trajectory.json on request).
inline int cmd_bench(const CliConfig& cfg, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const BenchmarkSpec spec = resolve_benchmark(cfg, 100, {});
    const auto dir = prepare_output_dir(cfg);
    const RunResult result = run_benchmark(spec, cfg.seed, detail::run_options(cfg, cfg.save_trajectory));

    if (has_format(cfg, "csv")) {
      report::write_file((dir / "results.csv").string(), report::results_csv(result, cfg.timing));
    }
    if (has_format(cfg, "json")) {
      nlohmann::json j{{"config", config_json(cfg, spec)},
                       {"seed", result.seed},
                       {"results", report::results_json(result, cfg.timing)}};
      report::write_file((dir / "results.json").string(), j.dump(2) + "\n");
    }
    if (cfg.save_trajectory) {
      report::write_file((dir / "trajectory.json").string(),
                         report::trajectory_json(*result.trajectory).dump() + "\n");
    }
    if (has_format(cfg, "svg") && result.trajectory) {
      const auto svgs = report::trajectory_svgs(*result.trajectory, spec.name + " benchmark");
      for (std::size_t d = 0; d < svgs.size(); ++d) {
        report::write_file((dir / ("trajectory_dim" + std::to_string(d + 1) + ".svg")).string(),
                           svgs[d]);
      }
    }
    for (const auto& e : result.per_engine) {
      out << e.label << "  mse=" << report::format_number(e.mse)
          << "  cpu_seconds=" << report::format_number(cfg.timing ? e.cpu_seconds : 0.0) << '\n';
    }
    return kExitOk;
  });
}

/// Runs EnKF, the adaptive MC-EnKF and MC-EnKF over the bandwidth grid and
/// writes sweep.csv with columns sigma,mse,gain_gap.
inline int cmd_sweep(const CliConfig& cfg, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    if (cfg.sigmas.empty()) throw ConfigError("sweep needs a non-empty --sigmas grid");
    std::vector<std::string> engines{"enkf", "mc:adaptive"};
    for (double s : cfg.sigmas) {
      std::ostringstream os;
      os << "mc:" << std::setprecision(17) << s;
      engines.push_back(os.str());
    }
    CliConfig resolved = cfg;
    resolved.engines = engines;
    BenchmarkSpec spec = resolve_benchmark(resolved, 100, {});
    for (auto& e : spec.engines) e.config.track_gain_gap = e.config.engine == Engine::mc_enkf;
    const auto dir = prepare_output_dir(cfg);
    const RunResult result = run_benchmark(spec, cfg.seed, detail::run_options(cfg, false));

    std::ostringstream csv;
    csv << "sigma,mse,gain_gap\n";
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < spec.engines.size(); ++i) {
      const auto& cfg_i = spec.engines[i].config;
      const auto& r = result.per_engine[i];
      std::string sigma;
      double gap = r.gain_gap;
      if (cfg_i.engine == Engine::enkf) {
        sigma = "enkf";
        gap = 0.0;
      } else if (cfg_i.bandwidth.policy == KernelBandwidth::Policy::adaptive) {
        sigma = "adaptive";
      } else {
        sigma = report::format_number(cfg_i.bandwidth.value);
      }
      csv << sigma << ',' << report::format_number(r.mse) << ',' << report::format_number(gap)
          << '\n';
      rows.push_back({{"sigma", sigma}, {"label", r.label}, {"mse", r.mse}, {"gain_gap", gap}});
      out << r.label << "  mse=" << report::format_number(r.mse)
          << "  gain_gap=" << report::format_number(gap) << '\n';
    }
    report::write_file((dir / "sweep.csv").string(), csv.str());
    if (has_format(cfg, "json")) {
      nlohmann::json j{{"config", config_json(cfg, spec)}, {"seed", cfg.seed}, {"rows", rows}};
      report::write_file((dir / "sweep.json").string(), j.dump(2) + "\n");
    }
    return kExitOk;
  });
}

/// Truth versus engine estimates, one SVG per state dimension. Runs a single
/// Monte Carlo run inline unless a trajectory file is given.
inline int cmd_plot(const CliConfig& cfg, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    TrajectoryRecord rec;
    std::string title;
    if (!cfg.trajectory_file.empty()) {
      std::ifstream f(cfg.trajectory_file);
      if (!f) throw ConfigError("missing trajectory data: cannot read " + cfg.trajectory_file);
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed trajectory file: ") + e.what());
      }
      rec = report::trajectory_from_json(j);
      title = "trajectory";
    } else {
      CliConfig inline_cfg = cfg;
      if (!inline_cfg.runs) inline_cfg.runs = 1;
      const BenchmarkSpec spec = resolve_benchmark(inline_cfg, 1, {"enkf", "mc:5"});
      const RunResult result = run_benchmark(spec, cfg.seed, detail::run_options(cfg, true));
      rec = *result.trajectory;
      title = spec.name + " benchmark";
    }
    const auto dir = prepare_output_dir(cfg);
    const auto svgs = report::trajectory_svgs(rec, title);
    for (std::size_t d = 0; d < svgs.size(); ++d) {
      const auto path = dir / ("trajectory_dim" + std::to_string(d + 1) + ".svg");
      report::write_file(path.string(), svgs[d]);
      out << "wrote " << path.string() << '\n';
    }
    return kExitOk;
  });
}

inline std::vector<double> parse_sigma_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad sigma '" + item + "'");
    }
    if (used != item.size() || !(v > 0.0)) throw ConfigError("bad sigma '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// Full entry point: parses argv and dispatches.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Robust ensemble Kalman filtering benchmarks"};
  app.require_subcommand(1);

  CliConfig cfg;
  std::optional<std::uint64_t> seed;
  std::string sigmas;
  bool no_timing = false;
  bool serial = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--benchmark", cfg.benchmark, "linear or nonlinear")
        ->check(CLI::IsMember({"linear", "nonlinear"}));
    sub->add_option("--engine", cfg.engines,
                    "engine spec: [label=]enkf | mc:<sigma> | mc:adaptive | mc:inf (repeatable)");
    sub->add_option("--runs", cfg.runs, "Monte Carlo runs");
    sub->add_option("--steps", cfg.steps, "time steps per run");
    sub->add_option("--ensemble-size", cfg.ensemble_size, "ensemble members per filter");
    sub->add_option("--seed", seed, std::string("base seed (fallback: $") + kSeedEnv + ", then 42)");
    sub->add_option("--output-dir", cfg.output_dir, "output directory");
    sub->add_option("--formats", cfg.formats, "subset of csv,json,svg")
        ->delimiter(',')
        ->check(CLI::IsMember({"csv", "json", "svg"}));
    sub->add_flag("--serial", serial, "run Monte Carlo runs on one thread");
    sub->add_flag("--no-timing", no_timing, "write cpu_seconds as 0 for byte-reproducible output");
  };

  auto* bench = app.add_subcommand("bench", "Monte Carlo MSE and timing comparison");
  add_common(bench);
  bench->add_flag("--save-trajectory", cfg.save_trajectory, "also write trajectory.json (run 0)");
  auto* sweep = app.add_subcommand("sweep", "MSE and gain gap across a bandwidth grid");
  add_common(sweep);
  auto* sigmas_opt = sweep->add_option("--sigmas", sigmas, "comma-separated bandwidth grid");
  auto* plot = app.add_subcommand("plot", "truth versus estimates, one SVG per dimension");
  add_common(plot);
  plot->add_option("--trajectory", cfg.trajectory_file, "trajectory.json from bench");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (seed) {
      cfg.seed = *seed;
    } else if (const char* env = std::getenv(kSeedEnv); env && *env) {
      std::size_t used = 0;
      const std::string text(env);
      cfg.seed = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    }
  } catch (const std::exception&) {
    err << "error: " << kSeedEnv << " is not an unsigned integer\n";
    return kExitUsage;
  }
  cfg.parallel = !serial;
  cfg.timing = !no_timing;

  if (bench->parsed()) {
    cfg.command = Command::bench;
    return cmd_bench(cfg, out, err);
  }
  if (sweep->parsed()) {
    cfg.command = Command::sweep;
    if (*sigmas_opt) {
      try {
        cfg.sigmas = parse_sigma_list(sigmas);
      } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
    }
    return cmd_sweep(cfg, out, err);
  }
  cfg.command = Command::plot;
  if (!plot->count("--formats")) cfg.formats = {"svg"};
  return cmd_plot(cfg, out, err);
}

}  // namespace robust_enkf::cli
