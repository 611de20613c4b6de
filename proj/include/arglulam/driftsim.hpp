// SPDX-License-Identifier: Apache-2.0
//
// Seeded simulation of a fabrication walk-along: headset drift, geometric
// marker visibility and noisy marker detections.
//
// Frames: the beam model sits at the origin of a canonical simulation frame
// (model -> canonical is identity). `SessionConfig::world_frame` places that
// canonical frame in the world, so every logged pose is world_frame * pose.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "arglulam/error.hpp"
#include "arglulam/geometry.hpp"
#include "arglulam/random.hpp"
#include "arglulam/sensing.hpp"

namespace arglulam {

/// Biased random walk on SE(3) sampled every dt, starting at identity.
/// Entry k is the drift at time k * dt.
inline std::vector<Pose> simulate_drift(const DriftParams& params, double duration, double dt,
                                        std::uint64_t seed) {
  validate(params);
  if (!(dt > 0.0)) throw Error(ErrorCode::kValidationFailed, "drift step must be positive");
  if (!(duration >= 0.0)) throw Error(ErrorCode::kValidationFailed, "duration must be >= 0");
  const auto steps = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
  Rng rng = Rng::substream(seed, kDriftStream);
  const double st = params.q_trans * std::sqrt(dt);
  const double sr = params.q_rot * std::sqrt(dt);
  const double mt = params.bias_trans * dt;
  const double mr = params.bias_rot * dt;

  std::vector<Pose> series;
  series.reserve(steps + 1);
  Pose drift;
  series.push_back(drift);
  for (std::size_t k = 0; k < steps; ++k) {
    const double tx = rng.normal(mt, st);
    const double ty = rng.normal(mt, st);
    const double tz = rng.normal(mt, st);
    const double rx = rng.normal(mr, sr);
    const double ry = rng.normal(mr, sr);
    const double rz = rng.normal(mr, sr);
    Pose step{UnitQuat::from_rotation_vector({rx, ry, rz}), Vec3{tx, ty, tz}};
    if (rx == 0.0 && ry == 0.0 && rz == 0.0) step.rotation = UnitQuat{};
    drift = drift * step;
    series.push_back(drift);
  }
  return series;
}

inline Vec3 headset_forward(const Pose& headset) { return headset.rotation.rotate({0.0, 0.0, 1.0}); }

inline double angle_between(const Vec3& a, const Vec3& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Marker ids (layout order) the headset can scan: within range, inside the
/// view cone, and facing the headset no more obliquely than max_incidence.
inline std::vector<std::uint16_t> visible_markers(const Pose& headset, const Pose& model_to_world,
                                                  const MarkerLayout& layout,
                                                  const DetectionParams& detection) {
  std::vector<std::uint16_t> out;
  const Vec3 eye = headset.translation;
  const Vec3 forward = headset_forward(headset);
  for (const auto& anchor : layout.anchors) {
    const Pose marker = model_to_world * anchor.pose_in_model;
    const Vec3 view = marker.translation - eye;
    const double d = view.norm();
    if (d > detection.max_range || d == 0.0) continue;
    if (angle_between(view, forward) > detection.fov_half_angle) continue;
    const Vec3 normal = marker.rotation.rotate({0.0, 0.0, 1.0});
    if (angle_between(-view, normal) > detection.max_incidence) continue;
    out.push_back(anchor.marker_id);
  }
  return out;
}

/// One noisy detection. The drift acts on the perceiver: the marker is seen
/// at inverse(drift) * true pose, then perturbed by distance-dependent
/// translation noise and a small rotation about a uniformly random axis.
inline Observation observe(const Pose& headset, const Pose& drift, const MarkerAnchor& anchor,
                           const Pose& model_to_world, const DetectionParams& detection, Rng& rng,
                           double time = 0.0) {
  const Pose truth = model_to_world * anchor.pose_in_model;
  const double d = distance(truth.translation, headset.translation);
  Pose measured = inverse(drift) * truth;

  const double st = detection.translation_sigma(d);
  const Vec3 dt{st * rng.normal(), st * rng.normal(), st * rng.normal()};
  const Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
  const double angle = detection.rotation_sigma() * rng.normal();
  measured.translation += dt;
  if (angle != 0.0 && axis.norm() > 0.0)
    measured.rotation = UnitQuat::from_axis_angle(axis, angle) * measured.rotation;

  Observation obs;
  obs.marker_id = anchor.marker_id;
  obs.measured_pose = measured;
  obs.time = time;
  obs.confidence = std::clamp(1.0 - d / detection.max_range, 0.05, 1.0);
  obs.observer_distance = d;
  return obs;
}

struct SessionConfig {
  MarkerLayout layout;
  DriftParams drift;
  DetectionParams detection;
  double walk_speed = 0.3;      // m/s
  double lateral_offset = 0.6;  // m, from the +y side face
  double eye_height = 0.9;      // m, above the beam top
  double duration = 120.0;      // s
  std::uint64_t seed = 0;
  Pose world_frame;  // canonical simulation frame in the world

  bool operator==(const SessionConfig&) const = default;

  double dt() const { return 1.0 / detection.detect_rate; }
  Pose model_to_world() const { return world_frame; }
};

inline void validate(const SessionConfig& c) {
  validate(c.layout.beam);
  validate(c.drift);
  validate(c.detection);
  if (!(c.walk_speed > 0.0)) throw Error(ErrorCode::kValidationFailed, "walk_speed must be positive");
  if (!(c.duration > 0.0)) throw Error(ErrorCode::kValidationFailed, "duration must be positive");
  if (!(c.lateral_offset >= 0.0)) throw Error(ErrorCode::kValidationFailed, "lateral_offset must be >= 0");
}

struct SessionSample {
  double time = 0.0;
  Pose headset;  // true headset pose, world frame
  Pose drift;    // perceived world = inverse(drift) * true world

  bool operator==(const SessionSample&) const = default;
};

struct ObservationRecord {
  Observation observation;
  Pose true_pose;  // marker in world frame

  bool operator==(const ObservationRecord&) const = default;
};

struct SessionLog {
  SessionConfig config;
  std::vector<SessionSample> samples;
  std::vector<ObservationRecord> observations;

  bool operator==(const SessionLog&) const = default;
};

/// Headset pose in the canonical frame: walking back and forth along the
/// beam beside its +y face, looking at the nearest point of the top edge.
inline Pose walk_pose(const SessionConfig& c, double t) {
  const BeamSpec& beam = c.layout.beam;
  const double period = 2.0 * beam.length / c.walk_speed;
  const double phase = std::fmod(t, period) * c.walk_speed;
  const double x = phase <= beam.length ? phase : 2.0 * beam.length - phase;
  const Vec3 eye{x, beam.width / 2.0 + c.lateral_offset, beam.height / 2.0 + c.eye_height};
  const Vec3 target{x, 0.0, beam.height / 2.0};
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross({0.0, 0.0, 1.0});
  right = right.norm() < 1e-9 ? Vec3{1.0, 0.0, 0.0} : right.normalized();
  const Vec3 down = forward.cross(right);
  const std::array<std::array<double, 3>, 3> m{{{right.x, down.x, forward.x},
                                                {right.y, down.y, forward.y},
                                                {right.z, down.z, forward.z}}};
  return {UnitQuat::from_matrix(m), eye};
}

/// Runs the walk-along; deterministic in (config, seed). Observations are
/// generated per tick in layout order, each marker from its own stream.
inline SessionLog run_session(const SessionConfig& config) {
  validate(config);
  const double dt = config.dt();
  const std::vector<Pose> drift = simulate_drift(config.drift, config.duration, dt, config.seed);
  const Pose& g = config.world_frame;
  const Pose g_inv = inverse(g);

  std::vector<Rng> streams;
  streams.reserve(config.layout.anchors.size());
  for (const auto& a : config.layout.anchors)
    streams.push_back(Rng::substream(config.seed, marker_stream(a.marker_id)));

  SessionLog log;
  log.config = config;
  log.samples.reserve(drift.size());
  for (std::size_t k = 0; k < drift.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    const Pose head = walk_pose(config, t);
    log.samples.push_back({t, g * head, g * drift[k] * g_inv});

    const auto visible = visible_markers(head, Pose{}, config.layout, config.detection);
    std::size_t next = 0;
    for (std::size_t i = 0; i < config.layout.anchors.size() && next < visible.size(); ++i) {
      const MarkerAnchor& anchor = config.layout.anchors[i];
      if (anchor.marker_id != visible[next]) continue;
      ++next;
      Observation obs = observe(head, drift[k], anchor, Pose{}, config.detection, streams[i], t);
      obs.measured_pose = g * obs.measured_pose;
      log.observations.push_back({obs, g * anchor.pose_in_model});
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Environment profiles. These are the calibrated defaults; see README.

struct Profile {
  std::string name;
  DriftParams drift;
  DetectionParams detection;
};

inline DriftParams default_drift() {
  DriftParams d;
  d.q_trans = 0.0002;
  d.q_rot = deg_to_rad(0.01);
  return d;
}

inline DetectionParams default_detection() { return DetectionParams{}; }

inline Profile lab_profile() {
  Profile p{"lab", default_drift(), default_detection()};
  p.detection.env_factor = 1.0;
  return p;
}

inline Profile factory_profile() {
  Profile p{"factory", default_drift(), default_detection()};
  p.detection.env_factor = 1.5;
  return p;
}

inline Profile profile_by_name(const std::string& name) {
  if (name == "lab") return lab_profile();
  if (name == "factory") return factory_profile();
  throw Error(ErrorCode::kValidationFailed, "unknown profile '" + name + "'");
}

/// Profile with every drift and noise term zeroed.
inline Profile noiseless_profile() {
  Profile p{"noiseless", DriftParams{}, default_detection()};
  p.detection.sigma0_trans = 0.0;
  p.detection.kappa_trans = 0.0;
  p.detection.sigma_rot = 0.0;
  return p;
}

inline SessionConfig make_session(const MarkerLayout& layout, const Profile& profile,
                                  std::uint64_t seed, double duration = 120.0) {
  SessionConfig c;
  c.layout = layout;
  c.drift = profile.drift;
  c.detection = profile.detection;
  c.duration = duration;
  c.seed = seed;
  return c;
}

}  // namespace arglulam
