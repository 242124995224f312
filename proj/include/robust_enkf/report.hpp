// CSV, JSON and SVG writers for benchmark results.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "robust_enkf/benchmark.hpp"
#include "robust_enkf/errors.hpp"

namespace robust_enkf::report {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

/// Header is exactly `label,mse,cpu_seconds`.
inline std::string results_csv(const RunResult& result, bool with_timing = true) {
  std::ostringstream os;
  os << "label,mse,cpu_seconds\n";
  for (const auto& e : result.per_engine) {
    os << e.label << ',' << format_number(e.mse) << ','
       << format_number(with_timing ? e.cpu_seconds : 0.0) << '\n';
  }
  return os.str();
}

inline nlohmann::json results_json(const RunResult& result, bool with_timing = true) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : result.per_engine) {
    rows.push_back({{"label", e.label},
                    {"mse", e.mse},
                    {"cpu_seconds", with_timing ? e.cpu_seconds : 0.0}});
  }
  return rows;
}

inline nlohmann::json trajectory_json(const TrajectoryRecord& rec) {
  auto to_rows = [](const std::vector<VectorXd>& seq) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& v : seq) rows.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return rows;
  };
  nlohmann::json j;
  j["truth"] = to_rows(rec.truth);
  j["engines"] = nlohmann::json::array();
  for (std::size_t e = 0; e < rec.labels.size(); ++e) {
    j["engines"].push_back({{"label", rec.labels[e]}, {"estimates", to_rows(rec.estimates[e])}});
  }
  return j;
}

inline TrajectoryRecord trajectory_from_json(const nlohmann::json& j) {
  auto from_rows = [](const nlohmann::json& rows) {
    std::vector<VectorXd> seq;
    for (const auto& row : rows) {
      const auto values = row.get<std::vector<double>>();
      seq.push_back(Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    return seq;
  };
  TrajectoryRecord rec;
  try {
    rec.truth = from_rows(j.at("truth"));
    for (const auto& e : j.at("engines")) {
      rec.labels.push_back(e.at("label").get<std::string>());
      rec.estimates.push_back(from_rows(e.at("estimates")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed trajectory file: ") + e.what());
  }
  if (rec.truth.empty() || rec.labels.empty()) throw ConfigError("trajectory file has no data");
  for (const auto& est : rec.estimates) {
    if (est.size() != rec.truth.size()) throw ConfigError("trajectory lengths differ");
  }
  return rec;
}

struct Series {
  std::string label;
  std::vector<double> values;
  std::string color;
};

/// Line chart of several series against the step index 1..N.
inline std::string line_chart_svg(const std::string& title, const std::vector<Series>& series) {
  constexpr double width = 900.0, height = 420.0;
  constexpr double left = 60.0, right = 170.0, top = 40.0, bottom = 40.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::size_t n = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(lo < hi)) {
    lo = (std::isfinite(lo) ? lo : 0.0) - 1.0;
    hi = lo + 2.0;
  }
  const double span = hi - lo;
  auto px = [&](std::size_t i) { return left + plot_w * (n > 1 ? double(i) / double(n - 1) : 0.5); };
  auto py = [&](double v) { return top + plot_h * (1.0 - (v - lo) / span); };

  char buf[128];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << title
     << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
     << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + span * t / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", v);
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
       << "</text>\n";
  }
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">step</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<polyline fill=\"none\" stroke=\"" << series[s].color
       << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      const double v = series[s].values[i];
      if (!std::isfinite(v)) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(i), py(v));
      os << buf;
    }
    os << "\"/>\n";
    const double ly = top + 16.0 + 18.0 * double(s);
    os << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\""
       << left + plot_w + 36 << "\" y2=\"" << ly << "\" stroke=\"" << series[s].color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + plot_w + 42 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// One chart per state dimension: truth and every engine's estimate, legend
/// entries suffixed with the 1-based dimension index.
inline std::vector<std::string> trajectory_svgs(const TrajectoryRecord& rec,
                                                const std::string& title) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const auto dims = rec.truth.front().size();
  std::vector<std::string> out;
  for (Eigen::Index d = 0; d < dims; ++d) {
    const std::string suffix = "-" + std::to_string(d + 1);
    std::vector<Series> series;
    Series truth{"True" + suffix, {}, "#000000"};
    for (const auto& v : rec.truth) truth.values.push_back(v(d));
    series.push_back(std::move(truth));
    for (std::size_t e = 0; e < rec.labels.size(); ++e) {
      Series s{rec.labels[e] + suffix, {}, palette[e % 8]};
      for (const auto& v : rec.estimates[e]) s.values.push_back(v(d));
      series.push_back(std::move(s));
    }
    out.push_back(line_chart_svg(title + " (dimension " + std::to_string(d + 1) + ")", series));
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << contents;
  if (!f) throw Error("failed writing " + path);
}

}  // namespace robust_enkf::report
