// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit tests. Random values come from std::mt19937_64
// with the test's own seed, independent of the library's streams.
#pragma once

#include <array>
#include <cmath>
#include <random>

#include "arglulam/geometry.hpp"

namespace testing_support {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Mat4 = std::array<std::array<double, 4>, 4>;

struct Sampler {
  explicit Sampler(std::uint64_t seed) : engine(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(engine); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine); }

  arglulam::Vec3 vec(double scale = 1.0) {
    return {uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)};
  }

  arglulam::UnitQuat rotation() {
    // Normalized Gaussian 4-vector is uniform on SO(3).
    return arglulam::UnitQuat(normal(), normal(), normal(), normal());
  }

  arglulam::Pose pose(double scale = 5.0) { return {rotation(), vec(scale)}; }

  std::mt19937_64 engine;
};

/// Rotation matrix built from the quaternion components by the textbook formula.
inline Mat3 quat_matrix(const arglulam::UnitQuat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline Mat4 homogeneous(const arglulam::Pose& p) {
  const Mat3 r = quat_matrix(p.rotation);
  Mat4 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = r[i][j];
  m[0][3] = p.translation.x;
  m[1][3] = p.translation.y;
  m[2][3] = p.translation.z;
  m[3][3] = 1.0;
  return m;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

inline double pose_distance(const arglulam::Pose& a, const arglulam::Pose& b) {
  const auto e = arglulam::pose_error(a, b);
  return std::max(e.angle, e.translation);
}

}  // namespace testing_support
