// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace marglap {

/// splitmix64 step; used to derive child seeds from a base seed plus tags.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic seed derivation: mix(base, a), mix(base, a, b), ...
/// Streams derived with distinct tags are independent for our purposes.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a) {
  std::uint64_t s = base ^ 0x6A09E667F3BCC909ULL;
  splitmix64(s);
  s ^= a;
  return splitmix64(s);
}
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(base, a), b);
}
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix_seed(mix_seed(base, a, b), c);
}

/// Seeded random stream with platform-independent double generation.
/// The engine is std::mt19937_64 (its bit stream is pinned by the standard);
/// doubles are built from raw bits so results do not depend on the standard
/// library's distribution implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [-1, 1).
  double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (caches the spare draw).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream tags for the independent sampling contexts of a run. Streams are
// derived as mix_seed(run_seed, tag, ...) so no two contexts ever collide.
namespace stream_tag {
inline constexpr std::uint64_t kInit = 1;        // parameter initialization
inline constexpr std::uint64_t kShuffle = 2;     // minibatch shuffling per epoch
inline constexpr std::uint64_t kLossAug = 3;     // eps draws for the training loss
inline constexpr std::uint64_t kHyperPass = 4;   // eps draws for curvature passes
inline constexpr std::uint64_t kSubsample = 5;   // tangent-subsample selection
inline constexpr std::uint64_t kEval = 6;        // test-time augmentation
inline constexpr std::uint64_t kData = 7;        // dataset generation/transforms
inline constexpr std::uint64_t kFinalReport = 8; // end-of-training reports
}  // namespace stream_tag

}  // namespace marglap
