// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "arglulam/error.hpp"

namespace arglulam {

inline constexpr double kFoot = 0.3048;  // exact, meters

constexpr double feet_to_m(double feet) { return feet * kFoot; }
constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Unit quaternion kept normalized with the canonical sign w >= 0, so equal
/// rotations compare equal component-wise.
class UnitQuat {
 public:
  UnitQuat() = default;

  /// Normalizes and canonicalizes the given components.
  UnitQuat(double w, double x, double y, double z) { assign(w, x, y, z); }

  static UnitQuat identity() { return {}; }

  /// For deserialization: components already unit length within 1e-12 are
  /// kept bit-for-bit (sign canonicalized) so stored values roundtrip exactly.
  static UnitQuat from_stored(double w, double x, double y, double z) {
    const double n2 = w * w + x * x + y * y + z * z;
    if (std::abs(n2 - 1.0) > 1e-12) return {w, x, y, z};
    UnitQuat q;
    const bool flip = w < 0.0 || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)))));
    const double sign = flip ? -1.0 : 1.0;
    q.w_ = sign * w;
    q.x_ = sign * x;
    q.y_ = sign * y;
    q.z_ = sign * z;
    return q;
  }

  static UnitQuat from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0 || angle == 0.0) return {};
    const double s = std::sin(angle / 2.0) / n;
    return {std::cos(angle / 2.0), axis.x * s, axis.y * s, axis.z * s};
  }

  /// Exponential map: rotation by |v| about v.
  static UnitQuat from_rotation_vector(const Vec3& v) {
    const double angle = v.norm();
    if (angle < 1e-12) return {1.0, v.x / 2.0, v.y / 2.0, v.z / 2.0};
    return from_axis_angle(v, angle);
  }

  static UnitQuat rx(double angle) { return from_axis_angle({1, 0, 0}, angle); }
  static UnitQuat ry(double angle) { return from_axis_angle({0, 1, 0}, angle); }
  static UnitQuat rz(double angle) { return from_axis_angle({0, 0, 1}, angle); }

  /// Builds the quaternion of a proper rotation matrix given row-major.
  static UnitQuat from_matrix(const std::array<std::array<double, 3>, 3>& m) {
    const double trace = m[0][0] + m[1][1] + m[2][2];
    if (trace > 0.0) {
      const double s = std::sqrt(trace + 1.0) * 2.0;
      return {0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s,
              (m[1][0] - m[0][1]) / s};
    }
    if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
      const double s = std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
      return {(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s,
              (m[0][2] + m[2][0]) / s};
    }
    if (m[1][1] > m[2][2]) {
      const double s = std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
      return {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s,
              (m[1][2] + m[2][1]) / s};
    }
    const double s = std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
    return {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s,
            0.25 * s};
  }

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  UnitQuat operator*(const UnitQuat& o) const {
    return {w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
            w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
            w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
            w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_};
  }

  UnitQuat conjugate() const {
    UnitQuat q;
    q.w_ = w_;
    q.x_ = -x_;
    q.y_ = -y_;
    q.z_ = -z_;
    return q;
  }

  Vec3 rotate(const Vec3& v) const {
    // v' = v + 2w(u x v) + 2 u x (u x v), u = vector part
    const Vec3 u{x_, y_, z_};
    const Vec3 c = u.cross(v);
    return v + c * (2.0 * w_) + u.cross(c) * 2.0;
  }

  std::array<std::array<double, 3>, 3> to_matrix() const {
    const double w = w_, x = x_, y = y_, z = z_;
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
  }

  /// Rotation angle in [0, pi].
  double angle() const {
    const double v = std::sqrt(x_ * x_ + y_ * y_ + z_ * z_);
    return 2.0 * std::atan2(v, w_);
  }

  /// Rotation vector (axis * angle), the inverse of from_rotation_vector.
  Vec3 log() const {
    const Vec3 u{x_, y_, z_};
    const double v = u.norm();
    if (v < 1e-12) return u * 2.0;
    return u * (angle() / v);
  }

  bool operator==(const UnitQuat&) const = default;

 private:
  void assign(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    // q and -q are the same rotation; w == 0 falls back to the first nonzero
    // vector component.
    const bool flip = w < 0.0 ||
                      (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)))));
    const double sign = flip ? -1.0 : 1.0;
    w_ = sign * w;
    x_ = sign * x;
    y_ = sign * y;
    z_ = sign * z;
  }

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Spherical interpolation along the shorter arc; t = 0 gives a, t = 1 gives b.
inline UnitQuat slerp(const UnitQuat& a, const UnitQuat& b, double t) {
  double bw = b.w(), bx = b.x(), by = b.y(), bz = b.z();
  double d = a.w() * bw + a.x() * bx + a.y() * by + a.z() * bz;
  if (d < 0.0) {
    d = -d;
    bw = -bw;
    bx = -bx;
    by = -by;
    bz = -bz;
  }
  double ka = 1.0 - t;
  double kb = t;
  if (d < 1.0 - 1e-12) {
    const double theta = std::acos(d);
    const double s = std::sin(theta);
    ka = std::sin((1.0 - t) * theta) / s;
    kb = std::sin(t * theta) / s;
  }
  return {ka * a.w() + kb * bw, ka * a.x() + kb * bx, ka * a.y() + kb * by, ka * a.z() + kb * bz};
}

/// Angle of the relative rotation between a and b, in [0, pi].
inline double angle_between(const UnitQuat& a, const UnitQuat& b) {
  return (a.conjugate() * b).angle();
}

/// Rigid transform: x -> rotation * x + translation.
struct Pose {
  UnitQuat rotation;
  Vec3 translation;

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {UnitQuat{}, t}; }
  static Pose from_rotation(const UnitQuat& q) { return {q, Vec3{}}; }

  bool operator==(const Pose&) const = default;
};

/// Applies b first, then a.
inline Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.translation + a.rotation.rotate(b.translation)};
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

inline Pose inverse(const Pose& p) {
  const UnitQuat inv = p.rotation.conjugate();
  return {inv, inv.rotate(-p.translation)};
}

inline Vec3 apply(const Pose& p, const Vec3& point) {
  return p.rotation.rotate(point) + p.translation;
}

/// Rotation angle and translation distance separating two poses.
struct PoseError {
  double angle = 0.0;
  double translation = 0.0;
};

inline PoseError pose_error(const Pose& a, const Pose& b) {
  return {angle_between(a.rotation, b.rotation), distance(a.translation, b.translation)};
}

// ---------------------------------------------------------------------------
// Beams and marker layouts

enum class BeamKind { kStraight, kTwisted, kChamfered };

enum class PlacementMode { kEdgeTop, kEdgeSide, kAround };

inline std::string_view to_string(BeamKind kind) {
  switch (kind) {
    case BeamKind::kStraight: return "straight";
    case BeamKind::kTwisted: return "twisted";
    case BeamKind::kChamfered: return "chamfered";
  }
  return "straight";
}

inline BeamKind beam_kind_from_string(std::string_view s) {
  if (s == "straight") return BeamKind::kStraight;
  if (s == "twisted") return BeamKind::kTwisted;
  if (s == "chamfered") return BeamKind::kChamfered;
  throw Error(ErrorCode::kValidationFailed, "unknown beam kind '" + std::string(s) + "'");
}

inline std::string_view to_string(PlacementMode mode) {
  switch (mode) {
    case PlacementMode::kEdgeTop: return "edge_top";
    case PlacementMode::kEdgeSide: return "edge_side";
    case PlacementMode::kAround: return "around";
  }
  return "edge_top";
}

inline PlacementMode placement_from_string(std::string_view s) {
  if (s == "edge_top") return PlacementMode::kEdgeTop;
  if (s == "edge_side") return PlacementMode::kEdgeSide;
  if (s == "around") return PlacementMode::kAround;
  throw Error(ErrorCode::kValidationFailed, "unknown placement '" + std::string(s) + "'");
}

/// Beam centerline runs along model +x from the origin; the rectangular
/// cross-section spans y (width) and z (height).
struct BeamSpec {
  std::string id;
  double length = 0.0;
  BeamKind kind = BeamKind::kStraight;
  double total_twist = 0.0;
  double width = 0.2;
  double height = 0.4;

  bool operator==(const BeamSpec&) const = default;
};

inline void validate(const BeamSpec& beam) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kValidationFailed, what); };
  if (!(beam.length > 0.0) || !std::isfinite(beam.length)) fail("beam length must be positive");
  if (!(beam.width > 0.0) || !(beam.height > 0.0)) fail("beam cross-section must be positive");
  if (!std::isfinite(beam.total_twist)) fail("beam twist must be finite");
  if (beam.kind != BeamKind::kTwisted && beam.total_twist != 0.0)
    fail("only twisted beams may carry a twist");
}

struct MarkerAnchor {
  std::uint16_t marker_id = 0;
  double arclength = 0.0;
  Pose pose_in_model;  // marker center; local +z is the outward face normal

  bool operator==(const MarkerAnchor&) const = default;
};

inline constexpr double kDefaultMarkerSize = 0.100;

struct MarkerLayout {
  BeamSpec beam;
  PlacementMode placement = PlacementMode::kEdgeTop;
  double marker_size = kDefaultMarkerSize;
  std::vector<MarkerAnchor> anchors;
  double spacing_nominal = 0.0;
  bool infeasible_spacing = false;

  bool operator==(const MarkerLayout&) const = default;

  const MarkerAnchor* find(std::uint16_t marker_id) const {
    for (const auto& a : anchors)
      if (a.marker_id == marker_id) return &a;
    return nullptr;
  }
};

/// Frame on the centerline at arclength s, twisted about the beam axis by the
/// fraction s / length of the total twist.
inline Pose beam_frame(const BeamSpec& beam, double s) {
  if (!(s >= 0.0 && s <= beam.length))
    throw Error(ErrorCode::kOutOfRange, "arclength " + std::to_string(s) + " outside beam");
  return {UnitQuat::rx(beam.total_twist * s / beam.length), Vec3{s, 0.0, 0.0}};
}

/// Point on the top face centerline at arclength s: the reference edge used
/// for layout lines and deviation sampling.
inline Vec3 reference_edge_point(const BeamSpec& beam, double s) {
  return apply(beam_frame(beam, s), Vec3{0.0, 0.0, beam.height / 2.0});
}

/// Marker offset from the beam frame for the given face. Faces cycle
/// up, +y side, down, -y side; marker local x stays along the beam.
inline Pose face_offset(const BeamSpec& beam, int face) {
  const double pi = std::numbers::pi;
  switch (face & 3) {
    case 0: return {UnitQuat{}, Vec3{0.0, 0.0, beam.height / 2.0}};
    case 1: return {UnitQuat::rx(-pi / 2.0), Vec3{0.0, beam.width / 2.0, 0.0}};
    case 2: return {UnitQuat::rx(pi), Vec3{0.0, 0.0, -beam.height / 2.0}};
    default: return {UnitQuat::rx(pi / 2.0), Vec3{0.0, -beam.width / 2.0, 0.0}};
  }
}

/// Places `count` markers along the beam. Feasible spacings are centered on the
/// beam; otherwise markers are spread evenly end to end and the layout is
/// flagged infeasible.
inline MarkerLayout generate_layout(const BeamSpec& beam, int count, double spacing,
                                    PlacementMode placement,
                                    double marker_size = kDefaultMarkerSize,
                                    int first_id = 0) {
  validate(beam);
  if (count < 2) throw Error(ErrorCode::kValidationFailed, "layout needs at least 2 markers");
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw Error(ErrorCode::kValidationFailed, "marker spacing must be positive");
  if (!(marker_size > 0.0)) throw Error(ErrorCode::kValidationFailed, "marker size must be positive");
  if (first_id < 0 || first_id + count > 65536)
    throw Error(ErrorCode::kValidationFailed, "marker ids exceed 16 bits");

  MarkerLayout layout;
  layout.beam = beam;
  layout.placement = placement;
  layout.marker_size = marker_size;
  layout.spacing_nominal = spacing;

  const double span = (count - 1) * spacing;
  const bool feasible = span <= beam.length * (1.0 + 1e-12);
  layout.infeasible_spacing = !feasible;
  const double margin = feasible ? std::max(0.0, (beam.length - span) / 2.0) : 0.0;

  layout.anchors.reserve(count);
  for (int k = 0; k < count; ++k) {
    double s = feasible ? margin + k * spacing : k * beam.length / (count - 1);
    s = std::clamp(s, 0.0, beam.length);
    int face = 0;
    if (placement == PlacementMode::kEdgeSide) face = 1;
    if (placement == PlacementMode::kAround) face = k % 4;
    MarkerAnchor anchor;
    anchor.marker_id = static_cast<std::uint16_t>(first_id + k);
    anchor.arclength = s;
    anchor.pose_in_model = beam_frame(beam, s) * face_offset(beam, face);
    layout.anchors.push_back(anchor);
  }
  return layout;
}

/// Corners of a square marker in the model frame, counterclockwise from the
/// local (-h, -h) corner.
inline std::array<Vec3, 4> marker_corners(const MarkerAnchor& anchor, double marker_size) {
  const double h = marker_size / 2.0;
  const std::array<Vec3, 4> local{Vec3{-h, -h, 0.0}, Vec3{h, -h, 0.0}, Vec3{h, h, 0.0},
                                  Vec3{-h, h, 0.0}};
  std::array<Vec3, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = apply(anchor.pose_in_model, local[i]);
  return out;
}

// ---------------------------------------------------------------------------
// The three factory beams.

struct BeamPreset {
  std::string name;
  BeamSpec beam;
  int count = 0;
  double spacing = 0.0;
  PlacementMode placement = PlacementMode::kEdgeTop;

  MarkerLayout layout(int first_id = 0) const {
    return generate_layout(beam, count, spacing, placement, kDefaultMarkerSize, first_id);
  }
};

inline constexpr double kDefaultTwist = std::numbers::pi / 2.0;

inline std::vector<BeamPreset> beam_presets() {
  return {
      {"straight-14", {"straight-14", feet_to_m(14), BeamKind::kStraight, 0.0, 0.2, 0.4}, 5,
       feet_to_m(2.5), PlacementMode::kEdgeTop},
      {"twisted-24", {"twisted-24", feet_to_m(24), BeamKind::kTwisted, kDefaultTwist, 0.2, 0.4},
       6, feet_to_m(6), PlacementMode::kAround},
      {"chamfered-40", {"chamfered-40", feet_to_m(40), BeamKind::kChamfered, 0.0, 0.2, 0.4}, 10,
       feet_to_m(4), PlacementMode::kEdgeTop},
  };
}

inline BeamPreset beam_preset(std::string_view name) {
  for (auto& p : beam_presets())
    if (p.name == name) return p;
  throw Error(ErrorCode::kValidationFailed, "unknown preset '" + std::string(name) + "'");
}

}  // namespace arglulam
