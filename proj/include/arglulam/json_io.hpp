// SPDX-License-Identifier: Apache-2.0
//
// JSON documents for layouts, sessions and alignment results. Poses are
// flat objects {qw, qx, qy, qz, tx, ty, tz}; angles are radians and lengths
// meters throughout.
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "arglulam/driftsim.hpp"
#include "arglulam/error.hpp"
#include "arglulam/evaluation.hpp"
#include "arglulam/geometry.hpp"
#include "arglulam/registration.hpp"

namespace arglulam {

using nlohmann::json;

inline void to_json(json& j, const Vec3& v) { j = json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; }
inline void from_json(const json& j, Vec3& v) {
  v = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
}

inline void to_json(json& j, const Pose& p) {
  j = json{{"qw", p.rotation.w()},    {"qx", p.rotation.x()},    {"qy", p.rotation.y()},
           {"qz", p.rotation.z()},    {"tx", p.translation.x}, {"ty", p.translation.y},
           {"tz", p.translation.z}};
}
inline void from_json(const json& j, Pose& p) {
  p.rotation = UnitQuat::from_stored(j.at("qw").get<double>(), j.at("qx").get<double>(),
                                     j.at("qy").get<double>(), j.at("qz").get<double>());
  p.translation = {j.at("tx").get<double>(), j.at("ty").get<double>(), j.at("tz").get<double>()};
}

inline void to_json(json& j, const BeamSpec& b) {
  j = json{{"id", b.id},
           {"length", b.length},
           {"kind", std::string(to_string(b.kind))},
           {"total_twist", b.total_twist},
           {"width", b.width},
           {"height", b.height}};
}
inline void from_json(const json& j, BeamSpec& b) {
  b.id = j.value("id", std::string{});
  b.length = j.at("length").get<double>();
  b.kind = beam_kind_from_string(j.value("kind", std::string("straight")));
  b.total_twist = j.value("total_twist", 0.0);
  b.width = j.value("width", 0.2);
  b.height = j.value("height", 0.4);
}

inline void to_json(json& j, const MarkerAnchor& a) {
  j = json{{"marker_id", a.marker_id}, {"arclength", a.arclength}, {"pose_in_model", a.pose_in_model}};
}
inline void from_json(const json& j, MarkerAnchor& a) {
  const int id = j.at("marker_id").get<int>();
  if (id < 0 || id > 0xFFFF) throw Error(ErrorCode::kValidationFailed, "marker_id out of range");
  a.marker_id = static_cast<std::uint16_t>(id);
  a.arclength = j.at("arclength").get<double>();
  a.pose_in_model = j.at("pose_in_model").get<Pose>();
}

inline void to_json(json& j, const MarkerLayout& l) {
  j = json{{"beam", l.beam},
           {"placement", std::string(to_string(l.placement))},
           {"marker_size", l.marker_size},
           {"anchors", l.anchors},
           {"spacing_nominal", l.spacing_nominal},
           {"infeasible_spacing", l.infeasible_spacing}};
}
inline void from_json(const json& j, MarkerLayout& l) {
  l.beam = j.at("beam").get<BeamSpec>();
  l.placement = placement_from_string(j.at("placement").get<std::string>());
  l.marker_size = j.at("marker_size").get<double>();
  l.anchors = j.at("anchors").get<std::vector<MarkerAnchor>>();
  l.spacing_nominal = j.value("spacing_nominal", 0.0);
  l.infeasible_spacing = j.value("infeasible_spacing", false);
  validate(l.beam);
  if (!(l.marker_size > 0.0)) throw Error(ErrorCode::kValidationFailed, "marker_size must be positive");
  for (std::size_t i = 1; i < l.anchors.size(); ++i)
    if (!(l.anchors[i].arclength > l.anchors[i - 1].arclength))
      throw Error(ErrorCode::kValidationFailed, "anchors must be strictly ascending in arclength");
}

inline void to_json(json& j, const DriftParams& d) {
  j = json{{"q_trans", d.q_trans}, {"q_rot", d.q_rot}, {"bias_trans", d.bias_trans}, {"bias_rot", d.bias_rot}};
}
inline void from_json(const json& j, DriftParams& d) {
  d.q_trans = j.at("q_trans").get<double>();
  d.q_rot = j.at("q_rot").get<double>();
  d.bias_trans = j.at("bias_trans").get<double>();
  d.bias_rot = j.at("bias_rot").get<double>();
}

inline void to_json(json& j, const DetectionParams& d) {
  j = json{{"max_range", d.max_range},       {"max_incidence", d.max_incidence},
           {"fov_half_angle", d.fov_half_angle}, {"sigma0_trans", d.sigma0_trans},
           {"kappa_trans", d.kappa_trans},   {"sigma_rot", d.sigma_rot},
           {"detect_rate", d.detect_rate},   {"env_factor", d.env_factor}};
}
inline void from_json(const json& j, DetectionParams& d) {
  d.max_range = j.at("max_range").get<double>();
  d.max_incidence = j.at("max_incidence").get<double>();
  d.fov_half_angle = j.at("fov_half_angle").get<double>();
  d.sigma0_trans = j.at("sigma0_trans").get<double>();
  d.kappa_trans = j.at("kappa_trans").get<double>();
  d.sigma_rot = j.at("sigma_rot").get<double>();
  d.detect_rate = j.at("detect_rate").get<double>();
  d.env_factor = j.at("env_factor").get<double>();
}

inline void to_json(json& j, const SessionConfig& c) {
  j = json{{"layout", c.layout},         {"drift", c.drift},
           {"detection", c.detection},   {"walk_speed", c.walk_speed},
           {"lateral_offset", c.lateral_offset}, {"eye_height", c.eye_height},
           {"duration", c.duration},     {"seed", c.seed},
           {"world_frame", c.world_frame}};
}
inline void from_json(const json& j, SessionConfig& c) {
  c.layout = j.at("layout").get<MarkerLayout>();
  c.drift = j.at("drift").get<DriftParams>();
  c.detection = j.at("detection").get<DetectionParams>();
  c.walk_speed = j.at("walk_speed").get<double>();
  c.lateral_offset = j.at("lateral_offset").get<double>();
  c.eye_height = j.at("eye_height").get<double>();
  c.duration = j.at("duration").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.world_frame = j.value("world_frame", Pose{});
}

inline void to_json(json& j, const Observation& o) {
  j = json{{"marker_id", o.marker_id},
           {"measured_pose", o.measured_pose},
           {"time", o.time},
           {"confidence", o.confidence},
           {"observer_distance", o.observer_distance}};
}
inline void from_json(const json& j, Observation& o) {
  o.marker_id = j.at("marker_id").get<std::uint16_t>();
  o.measured_pose = j.at("measured_pose").get<Pose>();
  o.time = j.at("time").get<double>();
  o.confidence = j.at("confidence").get<double>();
  o.observer_distance = j.value("observer_distance", 0.0);
}

inline void to_json(json& j, const SessionSample& s) {
  j = json{{"time", s.time}, {"headset", s.headset}, {"drift", s.drift}};
}
inline void from_json(const json& j, SessionSample& s) {
  s.time = j.at("time").get<double>();
  s.headset = j.at("headset").get<Pose>();
  s.drift = j.at("drift").get<Pose>();
}

inline void to_json(json& j, const ObservationRecord& r) {
  j = r.observation;
  j["true_pose"] = r.true_pose;
}
inline void from_json(const json& j, ObservationRecord& r) {
  r.observation = j.get<Observation>();
  r.true_pose = j.at("true_pose").get<Pose>();
}

inline void to_json(json& j, const SessionLog& log) {
  j = json{{"config", log.config}, {"samples", log.samples}, {"observations", log.observations}};
}
inline void from_json(const json& j, SessionLog& log) {
  log.config = j.at("config").get<SessionConfig>();
  log.samples = j.at("samples").get<std::vector<SessionSample>>();
  log.observations = j.at("observations").get<std::vector<ObservationRecord>>();
  for (std::size_t i = 1; i < log.samples.size(); ++i)
    if (log.samples[i].time < log.samples[i - 1].time)
      throw Error(ErrorCode::kValidationFailed, "session samples out of time order");
  for (const auto& r : log.observations)
    if (log.config.layout.find(r.observation.marker_id) == nullptr)
      throw Error(ErrorCode::kValidationFailed, "observation of a marker absent from the layout");
}

inline void to_json(json& j, const AlignmentResult& r) {
  json residuals = json::object();
  for (const auto& [id, pose] : r.per_marker_residual) residuals[std::to_string(id)] = pose;
  j = json{{"transform", r.transform},
           {"rmse", r.rmse},
           {"per_marker_residual", residuals},
           {"used_markers", r.used_markers},
           {"rejected_markers", r.rejected_markers},
           {"skipped_marker_ids", r.skipped_marker_ids},
           {"single_marker", r.single_marker}};
}
inline void from_json(const json& j, AlignmentResult& r) {
  r.transform = j.at("transform").get<Pose>();
  r.rmse = j.at("rmse").get<double>();
  r.per_marker_residual.clear();
  for (const auto& [key, value] : j.at("per_marker_residual").items())
    r.per_marker_residual[std::stoi(key)] = value.get<Pose>();
  r.used_markers = j.at("used_markers").get<std::set<int>>();
  r.rejected_markers = j.at("rejected_markers").get<std::set<int>>();
  r.skipped_marker_ids = j.value("skipped_marker_ids", std::vector<int>{});
  r.single_marker = j.value("single_marker", false);
}

inline void to_json(json& j, const CorrectionField& f) {
  j = json::array();
  for (const auto& k : f.knots) j.push_back(json{{"arclength", k.arclength}, {"correction", k.correction}});
  j = json{{"knots", j}};
}
inline void from_json(const json& j, CorrectionField& f) {
  f.knots.clear();
  for (const auto& k : j.at("knots"))
    f.knots.push_back({k.at("arclength").get<double>(), k.at("correction").get<Pose>()});
  for (std::size_t i = 1; i < f.knots.size(); ++i)
    if (!(f.knots[i].arclength > f.knots[i - 1].arclength))
      throw Error(ErrorCode::kValidationFailed, "correction knots must be strictly ascending");
}

inline void to_json(json& j, const DeviationReport& r) {
  j = json{{"strategy", std::string(to_string(r.strategy))},
           {"mean_mm", r.mean_mm},
           {"max_mm", r.max_mm},
           {"std_mm", r.std_mm},
           {"pass_tolerance", r.pass_tolerance},
           {"samples", r.per_sample.size()}};
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Parses a document, mapping JSON syntax and schema errors to kParseFailure.
template <typename T>
T parse_document(const std::string& text, const std::string& what) {
  try {
    return json::parse(text).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseFailure, "malformed " + what + ": " + e.what());
  }
}

template <typename T>
T load_document(const std::string& path, const std::string& what) {
  return parse_document<T>(read_text_file(path), what + " '" + path + "'");
}

/// Serialized form used for files: two-space indented, trailing newline.
template <typename T>
std::string dump_document(const T& value) {
  return json(value).dump(2) + "\n";
}

}  // namespace arglulam
