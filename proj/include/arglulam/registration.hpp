// SPDX-License-Identifier: Apache-2.0
//
// Model-to-world registration from multiple marker observations.
//
// Every observed marker contributes its four corners as weighted point
// correspondences. The rigid transform is the weighted least-squares
// point-set alignment (centroids, cross-covariance, SVD with a reflection
// guard). Residual per-marker transforms left after the global fit become
// knots of a correction field that is interpolated along the beam.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "arglulam/error.hpp"
#include "arglulam/geometry.hpp"
#include "arglulam/sensing.hpp"

namespace arglulam {

struct Correspondence {
  Vec3 model_point;
  Vec3 world_point;
  double weight = 1.0;
  int marker_id = -1;  // source marker, -1 when not from a marker
};

struct RigidFit {
  Pose transform;  // model -> world
  double rmse = 0.0;
};

/// Weighted root-mean-square distance between transformed model points and
/// their world counterparts.
inline double weighted_rmse(std::span<const Correspondence> corr, const Pose& transform) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& c : corr) {
    const Vec3 r = apply(transform, c.model_point) - c.world_point;
    num += c.weight * r.dot(r);
    den += c.weight;
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

/// Minimizes sum w_i |R m_i + t - x_i|^2 over proper rotations R and t.
inline RigidFit weighted_rigid_align(std::span<const Correspondence> corr) {
  if (corr.size() < 3) throw Error(ErrorCode::kTooFewPoints, "alignment needs at least 3 points");
  double total = 0.0;
  for (const auto& c : corr) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
      throw Error(ErrorCode::kValidationFailed, "correspondence weight must be finite and >= 0");
    total += c.weight;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kTooFewPoints, "total correspondence weight is zero");

  Eigen::Vector3d model_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d world_mean = Eigen::Vector3d::Zero();
  for (const auto& c : corr) {
    model_mean += c.weight * Eigen::Vector3d(c.model_point.x, c.model_point.y, c.model_point.z);
    world_mean += c.weight * Eigen::Vector3d(c.world_point.x, c.world_point.y, c.world_point.z);
  }
  model_mean /= total;
  world_mean /= total;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& c : corr) {
    const Eigen::Vector3d m =
        Eigen::Vector3d(c.model_point.x, c.model_point.y, c.model_point.z) - model_mean;
    const Eigen::Vector3d x =
        Eigen::Vector3d(c.world_point.x, c.world_point.y, c.world_point.z) - world_mean;
    cov += (c.weight / total) * m * x.transpose();
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-10 * sv(0))
    throw Error(ErrorCode::kDegenerateGeometry, "correspondences span fewer than two directions");

  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();

  std::array<std::array<double, 3>, 3> rm{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rm[i][j] = r(i, j);
  const UnitQuat q = UnitQuat::from_matrix(rm);
  const Eigen::Vector3d t = world_mean - r * model_mean;

  RigidFit fit;
  fit.transform = Pose{q, Vec3{t(0), t(1), t(2)}};
  fit.rmse = weighted_rmse(corr, fit.transform);
  return fit;
}

struct CorrespondenceSet {
  std::vector<Correspondence> correspondences;
  std::vector<int> skipped_marker_ids;  // observations of ids absent from the layout
};

/// Weight of one observation: confidence over the variance of the detection
/// noise at the recorded observer distance.
inline double observation_weight(const Observation& obs, const DetectionParams& detection) {
  const double sigma = std::max(detection.translation_sigma(obs.observer_distance), 1e-6);
  return obs.confidence / (sigma * sigma);
}

inline CorrespondenceSet observations_to_correspondences(std::span<const Observation> obs,
                                                         const MarkerLayout& layout,
                                                         const DetectionParams& detection) {
  CorrespondenceSet out;
  out.correspondences.reserve(obs.size() * 4);
  for (const auto& o : obs) {
    const MarkerAnchor* anchor = layout.find(o.marker_id);
    if (anchor == nullptr) {
      out.skipped_marker_ids.push_back(o.marker_id);
      continue;
    }
    const auto model = marker_corners(*anchor, layout.marker_size);
    MarkerAnchor measured = *anchor;
    measured.pose_in_model = o.measured_pose;
    const auto world = marker_corners(measured, layout.marker_size);
    const double w = observation_weight(o, detection);
    for (std::size_t i = 0; i < 4; ++i)
      out.correspondences.push_back({model[i], world[i], w, o.marker_id});
  }
  return out;
}

/// Drops correspondences whose residual exceeds k times the (lower) median
/// residual, but never leaves fewer than three.
inline std::vector<Correspondence> reject_outliers(std::span<const Correspondence> corr,
                                                   const Pose& transform, double k = 3.0) {
  if (!(k > 0.0)) throw Error(ErrorCode::kValidationFailed, "rejection factor must be positive");
  std::vector<Correspondence> all(corr.begin(), corr.end());
  if (all.size() <= 3) return all;

  std::vector<double> residual(all.size());
  for (std::size_t i = 0; i < all.size(); ++i)
    residual[i] = distance(apply(transform, all[i].model_point), all[i].world_point);
  std::vector<double> sorted = residual;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(sorted.size() - 1) / 2];
  const double threshold = k * median;

  std::vector<Correspondence> kept;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (residual[i] <= threshold) kept.push_back(all[i]);
  if (kept.size() >= 3) return kept;

  // Floor: the three smallest residuals, in input order.
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return residual[a] < residual[b]; });
  order.resize(3);
  std::sort(order.begin(), order.end());
  kept.clear();
  for (std::size_t i : order) kept.push_back(all[i]);
  return kept;
}

struct AlignmentResult {
  Pose transform;  // model -> world
  double rmse = 0.0;
  std::map<int, Pose> per_marker_residual;  // inverse(transform * anchor) * observed
  std::set<int> used_markers;
  std::set<int> rejected_markers;
  std::vector<int> skipped_marker_ids;
  bool single_marker = false;
};

/// Weighted mean of observed poses; rotations averaged on the quaternion
/// hemisphere of the first sample.
inline Pose mean_pose(std::span<const Pose> poses, std::span<const double> weights) {
  double total = 0.0;
  Vec3 t{};
  double qw = 0, qx = 0, qy = 0, qz = 0;
  const UnitQuat& ref = poses.front().rotation;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double w = weights[i];
    const UnitQuat& q = poses[i].rotation;
    const double sign =
        (q.w() * ref.w() + q.x() * ref.x() + q.y() * ref.y() + q.z() * ref.z()) < 0 ? -1.0 : 1.0;
    t += poses[i].translation * w;
    qw += sign * w * q.w();
    qx += sign * w * q.x();
    qy += sign * w * q.y();
    qz += sign * w * q.z();
    total += w;
  }
  return {UnitQuat{qw, qx, qy, qz}, t / total};
}

inline AlignmentResult fuse(std::span<const Observation> obs, const MarkerLayout& layout,
                            const DetectionParams& detection, double reject_k = 3.0) {
  AlignmentResult result;

  std::map<int, std::vector<Pose>> observed;
  std::map<int, std::vector<double>> weights;
  std::vector<Observation> known;
  for (const auto& o : obs) {
    if (layout.find(o.marker_id) == nullptr) {
      result.skipped_marker_ids.push_back(o.marker_id);
      continue;
    }
    known.push_back(o);
    observed[o.marker_id].push_back(o.measured_pose);
    weights[o.marker_id].push_back(observation_weight(o, detection));
  }
  if (known.empty()) throw Error(ErrorCode::kNoObservations, "no observations of layout markers");

  std::map<int, Pose> mean_observed;
  for (const auto& [id, poses] : observed) mean_observed[id] = mean_pose(poses, weights[id]);

  const auto corr = observations_to_correspondences(known, layout, detection).correspondences;

  if (observed.size() == 1) {
    const int id = observed.begin()->first;
    const MarkerAnchor& anchor = *layout.find(static_cast<std::uint16_t>(id));
    result.transform = mean_observed[id] * inverse(anchor.pose_in_model);
    result.rmse = weighted_rmse(corr, result.transform);
    result.single_marker = true;
  } else {
    RigidFit fit = weighted_rigid_align(corr);
    const auto kept = reject_outliers(corr, fit.transform, reject_k);
    if (kept.size() < corr.size()) {
      try {
        fit = weighted_rigid_align(kept);
        std::set<int> surviving;
        for (const auto& c : kept) surviving.insert(c.marker_id);
        for (const auto& [id, poses] : observed)
          if (!surviving.count(id)) result.rejected_markers.insert(id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateGeometry) throw;
      }
    }
    result.transform = fit.transform;
    result.rmse = fit.rmse;
  }

  for (const auto& [id, mean] : mean_observed) {
    if (result.rejected_markers.count(id)) continue;
    result.used_markers.insert(id);
    const MarkerAnchor& anchor = *layout.find(static_cast<std::uint16_t>(id));
    result.per_marker_residual[id] = inverse(result.transform * anchor.pose_in_model) * mean;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Correction field

struct CorrectionKnot {
  double arclength = 0.0;
  Pose correction;  // model-frame correction, applied on the right of the fit

  bool operator==(const CorrectionKnot&) const = default;
};

struct CorrectionField {
  std::vector<CorrectionKnot> knots;  // strictly increasing arclength

  bool operator==(const CorrectionField&) const = default;
};

inline constexpr double kMaxCorrectionAngle = deg_to_rad(10.0);
inline constexpr double kMaxCorrectionTranslation = 0.1;

/// One knot per used marker. A knot holds the world-frame correction that
/// moves the fitted marker pose onto its mean observation, i.e.
/// (T * anchor) * residual * inverse(T * anchor). Residuals beyond 10 deg or
/// 0.1 m mark a failed fit for that marker and are left out.
inline CorrectionField build_correction_field(const AlignmentResult& result,
                                              const MarkerLayout& layout) {
  std::vector<CorrectionKnot> knots;
  for (const auto& [id, residual] : result.per_marker_residual) {
    if (!result.used_markers.count(id)) continue;
    const MarkerAnchor* anchor = layout.find(static_cast<std::uint16_t>(id));
    if (anchor == nullptr) continue;
    if (residual.rotation.angle() >= kMaxCorrectionAngle ||
        residual.translation.norm() >= kMaxCorrectionTranslation)
      continue;
    const Pose& a = anchor->pose_in_model;
    knots.push_back({anchor->arclength, a * residual * inverse(a)});
  }
  if (knots.empty()) throw Error(ErrorCode::kEmptyResult, "no marker residuals to build a field");
  std::stable_sort(knots.begin(), knots.end(),
                   [](const auto& a, const auto& b) { return a.arclength < b.arclength; });
  // Coincident arclengths (e.g. markers on opposite faces) collapse to the first.
  CorrectionField field;
  for (const auto& k : knots)
    if (field.knots.empty() || k.arclength > field.knots.back().arclength) field.knots.push_back(k);
  return field;
}

/// Clamped piecewise interpolation: linear in translation, spherical in
/// rotation.
inline Pose query_correction(const CorrectionField& field, double s) {
  const auto& k = field.knots;
  if (k.empty()) throw Error(ErrorCode::kEmptyField, "correction field has no knots");
  if (s <= k.front().arclength) return k.front().correction;
  if (s >= k.back().arclength) return k.back().correction;
  const auto hi = std::upper_bound(k.begin(), k.end(), s,
                                   [](double v, const CorrectionKnot& knot) { return v < knot.arclength; });
  const auto lo = hi - 1;
  const double t = (s - lo->arclength) / (hi->arclength - lo->arclength);
  const Vec3 a = lo->correction.translation;
  const Vec3 b = hi->correction.translation;
  return {slerp(lo->correction.rotation, hi->correction.rotation, t), a + (b - a) * t};
}

}  // namespace arglulam
