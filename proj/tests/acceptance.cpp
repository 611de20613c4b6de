// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Usage: acceptance <path to arglulam binary>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "arglulam/evaluation.hpp"
#include "arglulam/server.hpp"
#include "process.hpp"
#include "support.hpp"
#include "svg_grids.hpp"

using namespace arglulam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

int failures = 0;

template <class F>
void criterion(int number, const std::string& title, double limit_s, F&& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.require(false, std::string("exception: ") + e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.require(seconds < limit_s, "runtime over " + std::to_string(limit_s) + " s");
  std::printf("%s %d %s: %s(%.2f s, limit %.0f s)\n", out.pass ? "PASS" : "FAIL", number, title.c_str(),
              out.detail.str().c_str(), seconds, limit_s);
  std::fflush(stdout);
  if (!out.pass) ++failures;
}

double weighted_sse(const std::vector<Correspondence>& c, const Pose& p) {
  double s = 0.0;
  for (const auto& k : c) {
    const Vec3 r = apply(p, k.model_point) - k.world_point;
    s += k.weight * r.dot(r);
  }
  return s;
}

double mean_deviation(const MarkerLayout& layout, const Profile& profile, std::uint64_t seed,
                      Strategy strategy = Strategy::kInterpolated) {
  return deviation_report(run_session(make_session(layout, profile, seed)), strategy).mean_mm;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

void zero_noise(Outcome& out) {
  double worst = 0.0;
  for (const auto& preset : beam_presets()) {
    const SessionLog log = run_session(make_session(preset.layout(), noiseless_profile(), 1));
    for (Strategy s : {Strategy::kGlobalFit, Strategy::kInterpolated}) {
      const double mean = deviation_report(log, s).mean_mm;
      worst = std::max(worst, mean);
      out.require(mean <= 1e-6, preset.name + " " + std::string(to_string(s)) + " mean " + std::to_string(mean));
    }
  }
  out.detail << "worst mean " << worst << " mm ";
}

void estimator(Outcome& out) {
  testing_support::Sampler rng(2024);
  double worst_pose = 0.0;
  long perturbations = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const Pose truth = rng.pose(5.0);
    const int n = rng.integer(4, 40);
    std::vector<Correspondence> exact, noisy;
    for (int i = 0; i < n; ++i) {
      const Vec3 m = rng.vec(3.0);
      const double w = rng.uniform(0.1, 5.0);
      exact.push_back({m, apply(truth, m), w});
      noisy.push_back({m, apply(truth, m) + Vec3{rng.normal(0.005), rng.normal(0.005), rng.normal(0.005)}, w});
    }
    const double err = testing_support::pose_distance(weighted_rigid_align(exact).transform, truth);
    worst_pose = std::max(worst_pose, err);
    out.require(err <= 1e-9, "instance " + std::to_string(inst) + " exact error " + std::to_string(err));

    const Pose fit = weighted_rigid_align(noisy).transform;
    const double best = weighted_sse(noisy, fit);
    for (int k = 0; k < 1000; ++k) {
      // Log-uniform perturbation size from 1e-5 to 1e-1 (rad and m).
      const double scale = std::pow(10.0, rng.uniform(-5.0, -1.0));
      const Pose delta{UnitQuat::from_axis_angle(rng.vec(1.0), rng.uniform(-scale, scale)), rng.vec(scale)};
      ++perturbations;
      if (!(best <= weighted_sse(noisy, delta * fit))) {
        out.require(false, "instance " + std::to_string(inst) + " beaten by a perturbation");
        break;
      }
    }
  }
  out.detail << "500 instances, worst exact error " << worst_pose << ", " << perturbations << " perturbations ";
}

void codec(Outcome& out) {
  long roundtrips = 0, flips = 0;
  for (int id = 0; id <= 0xFFFF; ++id) {
    const MarkerGrid g = encode_fmc(id);
    for (int r = 0; r < 4; ++r) {
      const auto rot = static_cast<GridRotation>(r);
      const FmcDecoded d = decode_fmc(rotate(g, rot));
      ++roundtrips;
      if (d.id != id || d.rotation != rot) out.require(false, "roundtrip id " + std::to_string(id));
    }
  }
  testing_support::Sampler rng(3);
  std::set<int> ids;
  while (ids.size() < 256) ids.insert(rng.integer(0, 0xFFFF));
  for (int id : ids) {
    const MarkerGrid g = encode_fmc(id);
    for (int row = 1; row <= 6; ++row)
      for (int col = 1; col <= 6; ++col) {
        const bool corner = (row == 1 || row == 6) && (col == 1 || col == 6);
        if (corner) continue;
        MarkerGrid bad = g;
        bad[row][col] = !bad[row][col];
        ++flips;
        bool detected = false;
        try {
          decode_fmc(bad);
        } catch (const Error& e) {
          detected = e.code() == ErrorCode::kBadChecksum;
        }
        out.require(detected, "flip (" + std::to_string(row) + "," + std::to_string(col) + ") of id " +
                                  std::to_string(id) + " undetected");
      }
  }
  out.detail << roundtrips << " roundtrips, " << flips << " payload flips ";
}

void monotonic(Outcome& out) {
  SweepOptions opt;
  opt.profile = factory_profile();
  opt.threads = std::max(1u, std::thread::hardware_concurrency());
  const BeamSpec beam{"sweep", 12.192};
  const SweepResult r = sweep_spacing(beam, {{17, 0.762}, {11, 1.2192}, {7, 1.8288}}, 50, 1, opt);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out.detail << fixed(r.rows[i].spacing, 4) << " m -> " << fixed(r.rows[i].mean_mm) << " mm; ";
    if (i > 0) out.require(r.rows[i].mean_mm > r.rows[i - 1].mean_mm, "not strictly increasing");
  }
}

void calibration(Outcome& out) {
  struct Target {
    std::string preset;
    double mean, band;
    bool within_tolerance;
  };
  const std::vector<Target> targets{{"straight-14", 1.2, 0.4, true}, {"chamfered-40", 1.7, 0.4, true},
                                    {"twisted-24", 2.3, 0.5, false}};
  for (const auto& t : targets) {
    const MarkerLayout layout = beam_preset(t.preset).layout();
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) sum += mean_deviation(layout, factory_profile(), seed);
    DeviationReport aggregate;
    aggregate.mean_mm = sum / 50;
    out.detail << t.preset << " " << fixed(aggregate.mean_mm) << " mm; ";
    out.require(std::abs(aggregate.mean_mm - t.mean) <= t.band, t.preset + " outside target band");
    out.require(tolerance_check(aggregate) == t.within_tolerance, t.preset + " tolerance class mismatch");
  }
}

void lab_below_factory(Outcome& out) {
  for (const auto& preset : beam_presets()) {
    const MarkerLayout layout = preset.layout();
    double lab = 0.0, factory = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      lab += mean_deviation(layout, lab_profile(), seed);
      factory += mean_deviation(layout, factory_profile(), seed);
    }
    out.detail << preset.name << " " << fixed(lab / 50) << " < " << fixed(factory / 50) << "; ";
    out.require(lab < factory, preset.name + " lab not below factory");
  }
}

void registry_end_to_end(Outcome& out, const std::string& cli, const fs::path& work) {
  const fs::path data = work / "data";
  auto start = [&](const std::string& tag) {
    const fs::path port_file = work / ("port_" + tag);
    auto child = std::make_unique<testing_support::Child>(
        cli, std::vector<std::string>{"serve", "--data", data.string(), "--port", "0", "--port-file", port_file.string()});
    const int port = testing_support::wait_for_port(port_file, std::chrono::seconds(10));
    if (port <= 0) throw std::runtime_error("server did not start");
    return std::make_pair(std::move(child), port);
  };

  auto [server, port] = start("a");
  std::map<std::string, std::string> documents;
  std::vector<BeamRecord> records;
  {
    httplib::Client client("127.0.0.1", port);
    for (const auto& preset : beam_presets()) {
      const auto res = client.Post("/api/beams", json{{"preset", preset.name}}.dump(), "application/json");
      out.require(res && res->status == 201, "upload " + preset.name);
      if (!res || res->status != 201) return;
      records.push_back(json::parse(res->body).get<BeamRecord>());
      documents[records.back().beam_id] = res->body;
    }
  }
  // Hard kill: nothing gets a chance to flush on the way out.
  server->stop(SIGKILL);
  auto restarted = start("b");
  httplib::Client client("127.0.0.1", restarted.second);

  const auto list = client.Get("/api/beams");
  out.require(list && json::parse(list->body).size() == records.size(), "records missing after restart");
  int resolved = 0, decoded = 0;
  for (const auto& r : records) {
    const auto doc = client.Get("/api/beams/" + r.beam_id);
    out.require(doc && doc->status == 200 && doc->body == documents[r.beam_id], r.beam_id + " changed after restart");
    for (std::size_t i = 0; i < r.layout.anchors.size(); ++i) {
      const int id = r.layout.anchors[i].marker_id;
      const auto res = client.Get("/api/markers/" + std::to_string(id));
      if (!res || res->status != 200) {
        out.require(false, "resolve " + std::to_string(id));
        continue;
      }
      const MarkerResolution m = json::parse(res->body).get<MarkerResolution>();
      out.require(m.beam_id == r.beam_id && m.anchor_index == static_cast<int>(i) && m.anchor == r.layout.anchors[i],
                  "resolve " + std::to_string(id) + " mismatch");
      ++resolved;
    }
    const auto sheet = client.Get("/api/beams/" + r.beam_id + "/markers.svg");
    out.require(sheet && sheet->status == 200, "sheet " + r.beam_id);
    if (!sheet) continue;
    const auto grids = testing_support::sheet_grids(sheet->body, {});
    out.require(static_cast<int>(grids.size()) == r.marker_block.count, "sheet " + r.beam_id + " marker count");
    for (const auto& [id, grid] : grids) {
      out.require(r.marker_block.contains(id) && decode_fmc(grid).id == id, "grid " + std::to_string(id));
      ++decoded;
    }
  }
  const int allocated = records.back().marker_block.first_id + records.back().marker_block.count;
  const auto extra = client.Post("/api/beams", R"({"preset":"straight-14"})", "application/json");
  out.require(extra && extra->status == 201 &&
                  json::parse(extra->body).get<BeamRecord>().marker_block.first_id == allocated,
              "allocation after restart reused ids");
  out.require(restarted.first->stop() == 0, "graceful shutdown");
  out.detail << records.size() << " beams, " << resolved << " ids resolved, " << decoded << " grids decoded ";
}

void determinism(Outcome& out, const std::string& cli, const fs::path& work) {
  auto twice = [&](std::vector<std::string> args, const std::string& name) {
    std::string first;
    for (int i = 0; i < 2; ++i) {
      auto a = args;
      const fs::path file = work / (name + std::to_string(i));
      a.insert(a.end(), {"--out", file.string()});
      const auto r = testing_support::run(cli, a);
      out.require(r.exit_code == 0, name + " exit code " + std::to_string(r.exit_code));
      const std::string bytes = testing_support::slurp(file);
      if (i == 0) first = bytes;
      else out.require(!bytes.empty() && bytes == first, name + " differs between runs");
    }
    out.detail << name << " " << first.size() << " bytes identical; ";
  };
  for (const auto& p : beam_presets())
    twice({"simulate", "--preset", p.name, "--profile", "factory", "--seed", "77"}, "session-" + p.name);
  twice({"sweep", "--configs", "0.762:17,1.2192:11,1.8288:7", "--runs", "5", "--seed", "77", "--threads", "4"},
        "sweep");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <arglulam binary>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = fs::temp_directory_path() / ("arglulam_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  criterion(1, "zero-noise exactness", 10, zero_noise);
  criterion(2, "estimator correctness", 30, estimator);
  criterion(3, "codec exhaustiveness", 10, codec);
  criterion(4, "spacing monotonicity", 120, monotonic);
  criterion(5, "calibration reproduction", 600, calibration);
  criterion(6, "lab below factory", 600, lab_below_factory);
  criterion(7, "registry end-to-end", 30, [&](Outcome& o) { registry_end_to_end(o, cli, work); });
  criterion(8, "determinism", 600, [&](Outcome& o) { determinism(o, cli, work); });

  fs::remove_all(work);
  std::printf("%s: %d of 8 criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
