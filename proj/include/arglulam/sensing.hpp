// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "arglulam/error.hpp"
#include "arglulam/geometry.hpp"

namespace arglulam {

/// Headset self-tracking drift as a biased random walk.
struct DriftParams {
  double q_trans = 0.0;     // m / sqrt(s), per axis
  double q_rot = 0.0;       // rad / sqrt(s), per axis
  double bias_trans = 0.0;  // m / s
  double bias_rot = 0.0;    // rad / s

  bool operator==(const DriftParams&) const = default;
};

/// Geometric detectability and measurement noise of a marker scan.
struct DetectionParams {
  double max_range = 3.0;                  // m
  double max_incidence = deg_to_rad(60);   // rad, ray vs marker normal
  double fov_half_angle = deg_to_rad(35);  // rad, ray vs headset forward
  double sigma0_trans = 0.001;             // m
  double kappa_trans = 0.001;              // m per m of distance
  double sigma_rot = deg_to_rad(0.05);     // rad
  double detect_rate = 10.0;               // Hz
  double env_factor = 1.0;                 // >= 1, scales all noise

  bool operator==(const DetectionParams&) const = default;

  /// Per-axis translation noise at observer distance d.
  double translation_sigma(double d) const {
    return env_factor * (sigma0_trans + kappa_trans * d);
  }
  double rotation_sigma() const { return env_factor * sigma_rot; }
};

inline void validate(const DriftParams& p) {
  if (!(p.q_trans >= 0 && p.q_rot >= 0 && p.bias_trans >= 0 && p.bias_rot >= 0))
    throw Error(ErrorCode::kValidationFailed, "drift parameters must be >= 0");
}

inline void validate(const DetectionParams& p) {
  auto fail = [](const char* what) { throw Error(ErrorCode::kValidationFailed, what); };
  if (!(p.max_range > 0)) fail("max_range must be positive");
  if (!(p.max_incidence > 0 && p.max_incidence <= std::numbers::pi / 2)) fail("max_incidence must be in (0, pi/2]");
  if (!(p.fov_half_angle > 0)) fail("fov_half_angle must be positive");
  if (!(p.sigma0_trans >= 0 && p.kappa_trans >= 0 && p.sigma_rot >= 0)) fail("noise sigmas must be >= 0");
  if (!(p.detect_rate > 0)) fail("detect_rate must be positive");
  if (!(p.env_factor >= 1)) fail("env_factor must be >= 1");
}

/// One marker pose measurement, expressed in the headset's (drifted) world.
struct Observation {
  std::uint16_t marker_id = 0;
  Pose measured_pose;
  double time = 0.0;               // s
  double confidence = 1.0;         // (0, 1]
  double observer_distance = 0.0;  // m, headset to marker at scan time

  bool operator==(const Observation&) const = default;
};

}  // namespace arglulam
