// SPDX-License-Identifier: Apache-2.0
//
// Seedable portable random streams.
//
// Engine: std::mt19937_64. Uniform and normal variates are computed here,
// not with <random> distributions.
//
// Stream splitting: substream n of base seed S is seeded with
//   splitmix64(S + 0x9E3779B97F4A7C15 * (n + 1)).
// Stream 0 drives headset drift; stream 1 + marker_id drives the measurement
// noise of that marker.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace arglulam {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base + 0x9E3779B97F4A7C15ull * (stream + 1));
}

inline constexpr std::uint64_t kDriftStream = 0;
constexpr std::uint64_t marker_stream(std::uint16_t marker_id) { return 1 + marker_id; }

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t base, std::uint64_t stream) {
    return Rng(substream_seed(base, stream));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal, Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace arglulam
