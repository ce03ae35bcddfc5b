#pragma once

// Grid runner over documented config keys with shared seeds. A cell is
// flagged when any of its seeds diverged or when the variance of its final
// MAE across seeds exceeds that of the reference cell.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hintseg/config.hpp"
#include "hintseg/svg_plot.hpp"
#include "hintseg/training_pipeline.hpp"

namespace hintseg {

struct AblationAxis {
  std::string key;
  std::vector<std::string> values;
};

/// "key=v1|v2|v3" (values separated by '|', since some values contain commas).
inline AblationAxis parse_ablation_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw config_error("ablation axis '" + text + "' must look like key=v1|v2");
  AblationAxis a{config_detail::trim(text.substr(0, eq)), {}};
  const auto known = RunConfig::keys();
  if (std::find(known.begin(), known.end(), a.key) == known.end()) throw config_error("unknown ablation key '" + a.key + "'");
  std::string rest = text.substr(eq + 1);
  std::size_t pos = 0;
  while (true) {
    const auto bar = rest.find('|', pos);
    a.values.push_back(config_detail::trim(rest.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos)));
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  if (a.values.empty() || a.values.front().empty()) throw config_error("ablation axis '" + a.key + "' has no values");
  return a;
}

struct AblationRun {
  std::uint64_t seed = 0;
  bool ok = false;
  bool diverged = false;
  std::string error;
  MetricReport metrics;
};

struct AblationCell {
  std::vector<std::pair<std::string, std::string>> assignment;
  std::vector<AblationRun> runs;
  bool failed = false;
  bool reference = false;
  bool flagged = false;
  std::string flag_reason;

  std::string label() const {
    std::string s;
    for (const auto& [k, v] : assignment) s += (s.empty() ? "" : " ") + k + "=" + v;
    return s.empty() ? "base" : s;
  }

  std::vector<double> finite_maes() const {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.ok && !r.diverged) v.push_back(r.metrics.mae);
    return v;
  }
  bool any_diverged() const {
    return std::any_of(runs.begin(), runs.end(), [](const AblationRun& r) { return r.diverged; });
  }
  double median(double MetricReport::*field) const {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.ok && !r.diverged) v.push_back(r.metrics.*field);
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  double mean(double MetricReport::*field) const {
    double s = 0;
    int n = 0;
    for (const auto& r : runs)
      if (r.ok && !r.diverged) {
        s += r.metrics.*field;
        ++n;
      }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  }
  /// Sample variance of the final MAE over non-diverged seeds.
  double mae_variance() const {
    const auto v = finite_maes();
    if (v.size() < 2) return 0.0;
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  }
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::size_t reference_index = 0;
};

/// Runs every combination of axis values for every seed. The reference cell
/// is the one whose values all equal `base`, or the first cell otherwise.
/// `progress`, when set, is called after each run.
inline AblationResult run_ablation(const std::vector<AblationAxis>& grid, const std::vector<PreparedItem>& items,
                                   const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                   const std::function<void(const AblationCell&, const AblationRun&)>& progress = {}) {
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  AblationResult result;
  std::vector<std::size_t> idx(grid.size(), 0);
  while (true) {
    AblationCell cell;
    for (std::size_t a = 0; a < grid.size(); ++a) cell.assignment.push_back({grid[a].key, grid[a].values[idx[a]]});
    result.cells.push_back(std::move(cell));
    std::size_t a = 0;
    for (; a < grid.size(); ++a) {
      if (++idx[a] < grid[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == grid.size()) break;
  }

  const std::string base_text = base.to_text();
  bool found_reference = false;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    auto& cell = result.cells[c];
    RunConfig cfg = base;
    try {
      for (const auto& [k, v] : cell.assignment) cfg.set(k, v);
      cfg.validate();
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.flag_reason = e.what();
      continue;
    }
    if (!found_reference && cfg.to_text() == base_text) {
      result.reference_index = c;
      found_reference = true;
    }
    for (auto seed : seeds) {
      AblationRun run;
      run.seed = seed;
      RunConfig rc = cfg;
      rc.set("seed", std::to_string(seed));
      try {
        const RunReport rep = run_pipeline(items, rc);
        run.diverged = rep.diverged;
        run.ok = true;
        if (rep.metrics) run.metrics = *rep.metrics;
      } catch (const std::exception& e) {
        run.error = e.what();
        cell.failed = true;
      }
      cell.runs.push_back(run);
      if (progress) progress(cell, run);
    }
  }

  auto& ref = result.cells[result.reference_index];
  ref.reference = true;
  const double ref_var = ref.mae_variance();
  for (auto& cell : result.cells) {
    if (cell.any_diverged()) {
      cell.flagged = true;
      cell.flag_reason = "diverged";
    } else if (!cell.reference && !cell.failed && cell.mae_variance() > ref_var) {
      cell.flagged = true;
      cell.flag_reason = "higher_variance";
    }
  }
  return result;
}

inline void write_ablation_outputs(const AblationResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  using pipeline_detail::fmt;
  fs::create_directories(fs::path(dir) / "plots");
  {
    std::ofstream os(fs::path(dir) / "ablation.csv", std::ios::binary);
    os << "cell,config,seed,status,mae,sm,em,fwb\n";
    for (std::size_t c = 0; c < r.cells.size(); ++c)
      for (const auto& run : r.cells[c].runs) {
        const std::string status = !run.ok ? "error" : run.diverged ? "diverged" : "ok";
        os << c << ",\"" << r.cells[c].label() << "\"," << run.seed << "," << status;
        if (run.ok && !run.diverged)
          os << "," << fmt(run.metrics.mae) << "," << fmt(run.metrics.s_measure) << "," << fmt(run.metrics.e_measure) << ","
             << fmt(run.metrics.f_w_beta);
        else
          os << ",,,,";
        os << "\n";
      }
  }
  {
    std::ofstream os(fs::path(dir) / "ablation_summary.csv", std::ios::binary);
    os << "cell,config,reference,median_mae,mean_mae,var_mae,mean_sm,mean_em,mean_fwb,flagged,flag_reason\n";
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
      const auto& cell = r.cells[c];
      os << c << ",\"" << cell.label() << "\"," << (cell.reference ? 1 : 0) << "," << fmt(cell.median(&MetricReport::mae))
         << "," << fmt(cell.mean(&MetricReport::mae)) << "," << fmt(cell.mae_variance()) << ","
         << fmt(cell.mean(&MetricReport::s_measure)) << "," << fmt(cell.mean(&MetricReport::e_measure)) << ","
         << fmt(cell.mean(&MetricReport::f_w_beta)) << "," << (cell.flagged ? 1 : 0) << "," << cell.flag_reason << "\n";
    }
  }
  std::vector<std::string> labels;
  std::vector<svg::Series> series{{"MAE", {}, {}}, {"S_m", {}, {}}, {"E_m", {}, {}}, {"F^w_b", {}, {}}};
  for (const auto& cell : r.cells) {
    labels.push_back(cell.label() + (cell.flagged ? " (!)" : ""));
    series[0].y.push_back(cell.mean(&MetricReport::mae));
    series[1].y.push_back(cell.mean(&MetricReport::s_measure));
    series[2].y.push_back(cell.mean(&MetricReport::e_measure));
    series[3].y.push_back(cell.mean(&MetricReport::f_w_beta));
  }
  std::ofstream(fs::path(dir) / "plots" / "ablation.svg") << svg::bar_chart("Ablation (mean over seeds)", labels, series);
}

}  // namespace hintseg
