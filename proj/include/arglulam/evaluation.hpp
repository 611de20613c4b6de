// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "arglulam/driftsim.hpp"
#include "arglulam/error.hpp"
#include "arglulam/registration.hpp"

namespace arglulam {

enum class Strategy { kGlobalFit, kInterpolated };

inline std::string_view to_string(Strategy s) {
  return s == Strategy::kGlobalFit ? "global_fit" : "interpolated";
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "global_fit" || s == "global") return Strategy::kGlobalFit;
  if (s == "interpolated") return Strategy::kInterpolated;
  throw Error(ErrorCode::kValidationFailed, "unknown strategy '" + std::string(s) + "'");
}

struct ToleranceSpec {
  double limit = 2.0;  // mm
};

inline constexpr double kSampleStep = 0.1;    // m between deviation samples
inline constexpr double kFusionWindow = 2.0;  // s of trailing observations

struct DeviationSample {
  double arclength = 0.0;     // m
  double deviation_mm = 0.0;
  double time = 0.0;          // s, evaluation instant
  bool stale = false;         // no scan in the window; older fusion reused
};

struct DeviationReport {
  std::vector<DeviationSample> per_sample;
  double mean_mm = 0.0;
  double max_mm = 0.0;
  double std_mm = 0.0;
  Strategy strategy = Strategy::kGlobalFit;
  bool pass_tolerance = false;
};

/// Mean deviation within the limit; the boundary counts as a pass.
inline bool tolerance_check(const DeviationReport& report, const ToleranceSpec& tol = {}) {
  return report.mean_mm <= tol.limit;
}

namespace detail {

struct WindowFit {
  Pose transform;
  CorrectionField field;
  bool has_field = false;
};

inline WindowFit fit_window(std::span<const Observation> window, const SessionConfig& config) {
  WindowFit out;
  const AlignmentResult result = fuse(window, config.layout, config.detection);
  out.transform = result.transform;
  try {
    out.field = build_correction_field(result, config.layout);
    out.has_field = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyResult) throw;
  }
  return out;
}

}  // namespace detail

/// Overlay deviation along the reference edge, sampled every 0.1 m. Each point
/// is evaluated at the tick where the headset passes nearest to it, using a
/// fusion of the trailing 2 s of scans. The displayed point is the model
/// point mapped by the fit (and correction) into the perceived world, then
/// back to the true world through the drift at that instant.
inline DeviationReport deviation_report(const SessionLog& log, Strategy strategy,
                                        const ToleranceSpec& tol = {}) {
  if (log.observations.empty())
    throw Error(ErrorCode::kNoObservations, "session has no observations");
  if (log.samples.empty()) throw Error(ErrorCode::kNoObservations, "session has no samples");

  const SessionConfig& config = log.config;
  const BeamSpec& beam = config.layout.beam;
  const Pose model_to_world = config.model_to_world();

  std::vector<Observation> obs;
  obs.reserve(log.observations.size());
  for (const auto& r : log.observations) obs.push_back(r.observation);
  auto first_after = [&](double t) {
    return std::lower_bound(obs.begin(), obs.end(), t,
                            [](const Observation& o, double v) { return o.time < v; });
  };
  auto first_beyond = [&](double t) {
    return std::upper_bound(obs.begin(), obs.end(), t,
                            [](double v, const Observation& o) { return v < o.time; });
  };

  DeviationReport report;
  report.strategy = strategy;
  const auto count = static_cast<std::size_t>(std::floor(beam.length / kSampleStep + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = std::min(static_cast<double>(i) * kSampleStep, beam.length);
    const Vec3 model_point = reference_edge_point(beam, s);
    const Vec3 truth = apply(model_to_world, model_point);

    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < log.samples.size(); ++k) {
      const double d = distance(log.samples[k].headset.translation, truth);
      if (d < best - 1e-9) {
        best = d;
        nearest = k;
      }
    }
    const SessionSample& at = log.samples[nearest];

    DeviationSample sample;
    sample.arclength = s;
    sample.time = at.time;
    double end = at.time;
    auto hi = first_beyond(end);
    auto lo = first_after(end - kFusionWindow);
    if (lo == hi) {
      sample.stale = true;
      // Most recent scan before now, or the very first scan if none yet.
      end = hi == obs.begin() ? obs.front().time : std::prev(hi)->time;
      hi = first_beyond(end);
      lo = first_after(end - kFusionWindow);
    }
    const detail::WindowFit fit =
        detail::fit_window(std::span<const Observation>(&*lo, static_cast<std::size_t>(hi - lo)), config);

    Pose displayed = fit.transform;
    if (strategy == Strategy::kInterpolated && fit.has_field)
      displayed = fit.transform * query_correction(fit.field, s);
    const Vec3 shown = apply(at.drift * displayed, model_point);
    sample.deviation_mm = distance(shown, truth) * 1000.0;
    report.per_sample.push_back(sample);
  }

  double sum = 0.0;
  for (const auto& p : report.per_sample) {
    sum += p.deviation_mm;
    report.max_mm = std::max(report.max_mm, p.deviation_mm);
  }
  const double n = static_cast<double>(report.per_sample.size());
  report.mean_mm = sum / n;
  double var = 0.0;
  for (const auto& p : report.per_sample) var += (p.deviation_mm - report.mean_mm) * (p.deviation_mm - report.mean_mm);
  report.std_mm = std::sqrt(var / n);
  report.pass_tolerance = tolerance_check(report, tol);
  return report;
}

// ---------------------------------------------------------------------------
// Spacing sweeps

struct SweepConfig {
  int count = 0;
  double spacing = 0.0;
  PlacementMode placement = PlacementMode::kEdgeTop;
};

/// Marker count that fills a beam of the given length at the given spacing.
inline int count_for_spacing(double length, double spacing) {
  return static_cast<int>(std::floor(length / spacing + 1e-9)) + 1;
}

struct SweepRow {
  double spacing = 0.0;
  int count = 0;
  int runs = 0;
  double mean_mm = 0.0;
  double std_mm = 0.0;
  double max_mm = 0.0;
  double pass_rate = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct SweepOptions {
  Profile profile = factory_profile();
  Strategy strategy = Strategy::kInterpolated;
  double duration = 120.0;
  ToleranceSpec tolerance;
  unsigned threads = 1;
};

/// Runs `runs` seeded sessions (seed = base_seed + run) per configuration.
/// Rows are ordered by spacing; run results are aggregated in seed order so
/// the outcome does not depend on the thread count.
inline SweepResult sweep_spacing(const BeamSpec& beam, const std::vector<SweepConfig>& configs,
                                 int runs, std::uint64_t base_seed, const SweepOptions& options = {}) {
  if (runs < 1) throw Error(ErrorCode::kValidationFailed, "sweep needs at least one run");
  SweepResult result;
  for (const SweepConfig& sc : configs) {
    const MarkerLayout layout = generate_layout(beam, sc.count, sc.spacing, sc.placement);
    auto one = [&](int run) {
      const SessionConfig cfg =
          make_session(layout, options.profile, base_seed + static_cast<std::uint64_t>(run), options.duration);
      return deviation_report(run_session(cfg), options.strategy, options.tolerance);
    };
    std::vector<DeviationReport> reports(static_cast<std::size_t>(runs));
    if (options.threads <= 1) {
      for (int r = 0; r < runs; ++r) reports[r] = one(r);
    } else {
      for (int start = 0; start < runs; start += static_cast<int>(options.threads)) {
        std::vector<std::future<DeviationReport>> batch;
        const int stop = std::min(runs, start + static_cast<int>(options.threads));
        for (int r = start; r < stop; ++r) batch.push_back(std::async(std::launch::async, one, r));
        for (int r = start; r < stop; ++r) reports[r] = batch[r - start].get();
      }
    }

    SweepRow row;
    row.spacing = sc.spacing;
    row.count = sc.count;
    row.runs = runs;
    double sum = 0.0;
    int passed = 0;
    for (const auto& rep : reports) {
      sum += rep.mean_mm;
      row.max_mm = std::max(row.max_mm, rep.max_mm);
      passed += rep.pass_tolerance ? 1 : 0;
    }
    row.mean_mm = sum / runs;
    double var = 0.0;
    for (const auto& rep : reports) var += (rep.mean_mm - row.mean_mm) * (rep.mean_mm - row.mean_mm);
    row.std_mm = std::sqrt(var / runs);
    row.pass_rate = static_cast<double>(passed) / runs;
    result.rows.push_back(row);
  }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.spacing < b.spacing; });
  return result;
}

// ---------------------------------------------------------------------------
// CSV export

inline constexpr const char* kSweepCsvHeader = "spacing_m,count,runs,mean_mm,std_mm,max_mm,pass_rate";
inline constexpr const char* kReportCsvHeader = "arclength_m,deviation_mm,time_s,stale";

namespace detail {
inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}
}  // namespace detail

inline std::string to_csv(const SweepResult& sweep) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : sweep.rows) {
    out += detail::fixed4(r.spacing) + "," + std::to_string(r.count) + "," + std::to_string(r.runs) +
           "," + detail::fixed4(r.mean_mm) + "," + detail::fixed4(r.std_mm) + "," +
           detail::fixed4(r.max_mm) + "," + detail::fixed4(r.pass_rate) + "\n";
  }
  return out;
}

inline std::string to_csv(const DeviationReport& report) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& p : report.per_sample) {
    out += detail::fixed4(p.arclength) + "," + detail::fixed4(p.deviation_mm) + "," +
           detail::fixed4(p.time) + "," + (p.stale ? "1" : "0") + "\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "' for writing");
  f << content;
  f.flush();
  if (!f) throw Error(ErrorCode::kIoFailure, "failed writing '" + path + "'");
}

template <typename Report>
void export_report(const Report& report, const std::string& path) {
  write_text_file(path, to_csv(report));
}

}  // namespace arglulam
