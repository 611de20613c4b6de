// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "arglulam/evaluation.hpp"
#include "arglulam/json_io.hpp"
#include "support.hpp"

using namespace arglulam;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream fields(line);
    std::string f;
    while (std::getline(fields, f, ',')) cells.push_back(f);
    rows.push_back(cells);
  }
  return rows;
}

// Hand-built log: every marker scanned once, noise free, at t = 0 with no
// drift. The headset is far away at t = 0 and beside the beam at t = 5,
// where the drift has become a pure 3 mm shift along x.
SessionLog stale_shift_log() {
  SessionLog log;
  log.config = make_session(beam_preset("straight-14").layout(), noiseless_profile(), 0, 5.0);
  const BeamSpec& beam = log.config.layout.beam;
  log.samples.push_back({0.0, Pose::from_translation({0, 100, 0}), Pose{}});
  log.samples.push_back({5.0, Pose::from_translation({beam.length / 2, 1.0, 1.0}), Pose::from_translation({0.003, 0, 0})});
  for (const auto& a : log.config.layout.anchors) {
    Observation o;
    o.marker_id = a.marker_id;
    o.measured_pose = a.pose_in_model;
    o.confidence = 0.5;
    o.observer_distance = 1.0;
    log.observations.push_back({o, a.pose_in_model});
  }
  return log;
}

}  // namespace

TEST(Tolerance, MeanAgainstLimit) {
  DeviationReport r;
  r.mean_mm = 1.2;
  EXPECT_TRUE(tolerance_check(r));
  r.mean_mm = 2.3;
  EXPECT_FALSE(tolerance_check(r));
  r.mean_mm = 2.0;
  EXPECT_TRUE(tolerance_check(r));
  r.mean_mm = 2.3;
  EXPECT_TRUE(tolerance_check(r, ToleranceSpec{2.5}));
}

TEST(Deviation, ZeroNoiseIsZeroForEveryPresetAndStrategy) {
  for (const auto& p : beam_presets()) {
    const SessionLog log = run_session(make_session(p.layout(), noiseless_profile(), 3));
    for (Strategy s : {Strategy::kGlobalFit, Strategy::kInterpolated}) {
      const DeviationReport r = deviation_report(log, s);
      EXPECT_LE(r.mean_mm, 1e-6) << p.name;
      EXPECT_LE(r.max_mm, 1e-6) << p.name;
      EXPECT_TRUE(r.pass_tolerance);
      EXPECT_EQ(r.strategy, s);
    }
  }
}

TEST(Deviation, StaleWindowShowsTheDriftSinceTheLastScan) {
  const SessionLog log = stale_shift_log();
  for (Strategy s : {Strategy::kGlobalFit, Strategy::kInterpolated}) {
    const DeviationReport r = deviation_report(log, s);
    ASSERT_EQ(r.per_sample.size(), 43u);
    for (const auto& p : r.per_sample) {
      EXPECT_NEAR(p.deviation_mm, 3.0, 1e-9);
      EXPECT_TRUE(p.stale);
      EXPECT_EQ(p.time, 5.0);
    }
    EXPECT_NEAR(r.mean_mm, 3.0, 1e-9);
    EXPECT_NEAR(r.std_mm, 0.0, 1e-9);
    EXPECT_FALSE(r.pass_tolerance);
  }
}

TEST(Deviation, ConstantDriftSeenByTheScansIsCancelled) {
  SessionLog log = stale_shift_log();
  const Pose drift{UnitQuat::rz(0.002), {0.004, -0.002, 0.001}};
  for (auto& s : log.samples) s.drift = drift;
  for (auto& r : log.observations) {
    r.observation.time = 5.0;
    r.observation.measured_pose = inverse(drift) * r.true_pose;
  }
  for (Strategy s : {Strategy::kGlobalFit, Strategy::kInterpolated}) {
    const DeviationReport r = deviation_report(log, s);
    EXPECT_LE(r.max_mm, 1e-9);
    for (const auto& p : r.per_sample) EXPECT_FALSE(p.stale);
  }
}

TEST(Deviation, SamplesEveryTenthOfAMetreAlongTheBeam) {
  const SessionLog log = run_session(make_session(beam_preset("chamfered-40").layout(), factory_profile(), 5, 60.0));
  const DeviationReport r = deviation_report(log, Strategy::kInterpolated);
  ASSERT_EQ(r.per_sample.size(), 122u);
  for (std::size_t i = 0; i < r.per_sample.size(); ++i) {
    EXPECT_NEAR(r.per_sample[i].arclength, 0.1 * i, 1e-9);
    EXPECT_GE(r.per_sample[i].deviation_mm, 0.0);
  }
  EXPECT_LE(r.mean_mm, r.max_mm);
  EXPECT_GT(r.mean_mm, 0.0);
}

TEST(Deviation, NoObservations) {
  SessionLog log = stale_shift_log();
  log.observations.clear();
  try {
    deviation_report(log, Strategy::kGlobalFit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoObservations);
  }
}

TEST(DeviationProperty, InvariantUnderGlobalRigidMotion) {
  testing_support::Sampler rng(40);
  for (const auto& p : beam_presets()) {
    SessionConfig base = make_session(p.layout(), factory_profile(), 17, 60.0);
    SessionConfig moved = base;
    moved.world_frame = rng.pose(20.0);
    const SessionLog a = run_session(base);
    const SessionLog b = run_session(moved);
    ASSERT_EQ(a.observations.size(), b.observations.size());
    for (Strategy s : {Strategy::kGlobalFit, Strategy::kInterpolated}) {
      const DeviationReport ra = deviation_report(a, s);
      const DeviationReport rb = deviation_report(b, s);
      ASSERT_EQ(ra.per_sample.size(), rb.per_sample.size());
      for (std::size_t i = 0; i < ra.per_sample.size(); ++i) {
        EXPECT_NEAR(ra.per_sample[i].deviation_mm, rb.per_sample[i].deviation_mm, 1e-6) << p.name << " " << i << " " << (s == Strategy::kGlobalFit);
        EXPECT_EQ(ra.per_sample[i].time, rb.per_sample[i].time);
      }
    }
  }
}

TEST(DeviationProperty, InterpolatedWithinTenPercentOfGlobalFit) {
  for (const auto& p : beam_presets()) {
    double global = 0.0, interp = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const SessionLog log = run_session(make_session(p.layout(), factory_profile(), seed));
      global += deviation_report(log, Strategy::kGlobalFit).mean_mm;
      interp += deviation_report(log, Strategy::kInterpolated).mean_mm;
    }
    EXPECT_LE(interp, 1.1 * global) << p.name;
  }
}

TEST(Sweep, ZeroNoiseProfileGivesZeroEverywhere) {
  SweepOptions opt;
  opt.profile = noiseless_profile();
  opt.duration = 60.0;
  const BeamSpec beam{"s", 12.192};
  const SweepResult r = sweep_spacing(beam, {{7, 1.8288}, {17, 0.762}, {11, 1.2192}}, 3, 1, opt);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(r.rows[0].spacing, 0.762);
  EXPECT_DOUBLE_EQ(r.rows[2].spacing, 1.8288);
  for (const auto& row : r.rows) {
    EXPECT_LE(row.mean_mm, 1e-6);
    EXPECT_EQ(row.pass_rate, 1.0);
    EXPECT_EQ(row.runs, 3);
  }
}

TEST(Sweep, DeterministicAndIndependentOfThreads) {
  const BeamSpec beam{"s", 12.192};
  const std::vector<SweepConfig> configs{{17, 0.762}, {7, 1.8288}};
  SweepOptions opt;
  opt.duration = 60.0;
  const std::string once = to_csv(sweep_spacing(beam, configs, 1, 42, opt));
  EXPECT_EQ(once, to_csv(sweep_spacing(beam, configs, 1, 42, opt)));
  const std::string serial = to_csv(sweep_spacing(beam, configs, 6, 42, opt));
  opt.threads = 4;
  EXPECT_EQ(serial, to_csv(sweep_spacing(beam, configs, 6, 42, opt)));
}

TEST(Sweep, RowAggregatesMatchPerRunReports) {
  const BeamSpec beam{"s", 7.0};
  SweepOptions opt;
  opt.duration = 60.0;
  const SweepResult r = sweep_spacing(beam, {{5, 1.5}}, 4, 10, opt);
  const MarkerLayout layout = generate_layout(beam, 5, 1.5, PlacementMode::kEdgeTop);
  std::vector<double> means;
  double mx = 0.0;
  int passed = 0;
  for (int run = 0; run < 4; ++run) {
    const auto rep = deviation_report(run_session(make_session(layout, factory_profile(), 10 + run, 60.0)),
                                      Strategy::kInterpolated);
    means.push_back(rep.mean_mm);
    mx = std::max(mx, rep.max_mm);
    passed += rep.mean_mm <= 2.0;
  }
  const double mean = (means[0] + means[1] + means[2] + means[3]) / 4;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  EXPECT_NEAR(r.rows[0].mean_mm, mean, 1e-12);
  EXPECT_NEAR(r.rows[0].std_mm, std::sqrt(var / 4), 1e-12);
  EXPECT_EQ(r.rows[0].max_mm, mx);
  EXPECT_EQ(r.rows[0].pass_rate, passed / 4.0);
}

TEST(Sweep, RejectsZeroRuns) {
  EXPECT_THROW(sweep_spacing(BeamSpec{"s", 4.0}, {{3, 1.0}}, 0, 1), Error);
}

TEST(SweepProperty, LabMeanNonDecreasingInSpacing) {
  SweepOptions opt;
  opt.profile = lab_profile();
  const BeamSpec beam{"s", 12.192};
  const SweepResult r = sweep_spacing(beam, {{17, 0.762}, {11, 1.2192}, {7, 1.8288}}, 50, 1, opt);
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_GE(r.rows[i].mean_mm, r.rows[i - 1].mean_mm);
}

TEST(CountForSpacing, FillsTheBeam) {
  EXPECT_EQ(count_for_spacing(12.192, 0.762), 17);
  EXPECT_EQ(count_for_spacing(12.192, 1.2192), 11);
  EXPECT_EQ(count_for_spacing(12.192, 1.8288), 7);
}

TEST(Csv, EmptySweepIsHeaderOnly) {
  EXPECT_EQ(to_csv(SweepResult{}), std::string(kSweepCsvHeader) + "\n");
}

TEST(Csv, ThreeRowSweepAndReparse) {
  SweepResult r;
  r.rows = {{0.762, 17, 50, 1.53271234, 0.1, 6.2, 1.0}, {1.2192, 11, 50, 1.67634999, 0.2, 7.0, 0.96},
            {1.8288, 7, 50, 1.86680001, 0.3, 8.1, 0.8}};
  const auto rows = parse_csv(to_csv(r));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"spacing_m", "count", "runs", "mean_mm", "std_mm", "max_mm", "pass_rate"}));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::stod(rows[i + 1][3]), r.rows[i].mean_mm, 5e-5);
    EXPECT_EQ(std::stoi(rows[i + 1][1]), r.rows[i].count);
    EXPECT_EQ(rows[i + 1][0].substr(rows[i + 1][0].find('.') + 1).size(), 4u);
  }
}

TEST(Csv, ReportRowsMatchSamples) {
  const SessionLog log = run_session(make_session(beam_preset("straight-14").layout(), factory_profile(), 2));
  const DeviationReport r = deviation_report(log, Strategy::kInterpolated);
  const auto rows = parse_csv(to_csv(r));
  ASSERT_EQ(rows.size(), r.per_sample.size() + 1);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"arclength_m", "deviation_mm", "time_s", "stale"}));
  double sum = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    sum += std::stod(rows[i][1]);
    EXPECT_TRUE(rows[i][3] == "0" || rows[i][3] == "1");
  }
  EXPECT_NEAR(sum / r.per_sample.size(), r.mean_mm, 5e-5);
}

TEST(Csv, ExportWritesFileAndReportsIoFailure) {
  const auto dir = std::filesystem::temp_directory_path() / "arglulam_csv_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "sweep.csv").string();
  export_report(SweepResult{}, path);
  EXPECT_EQ(read_text_file(path), std::string(kSweepCsvHeader) + "\n");
  try {
    export_report(SweepResult{}, (dir / "missing" / "x.csv").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoFailure);
  }
  std::filesystem::remove_all(dir);
}
