// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/keys.hpp"
#include "csilab/latent.hpp"

namespace csilab {

/// Smallest decision bound whose empirical false-positive rate on `null_stats`
/// does not exceed `fpr_target`.
///
/// With k = floor(fpr * n) and s the (k+1)-th most extreme null value in the
/// detecting direction:
///   lower_detects  -> threshold = s          (detected iff stat <  s)
///   higher_detects -> threshold just above s (detected iff stat >= threshold)
/// Integer statistics use s + 1 for the latter. A null sample where every
/// value is equal is rejected for continuous statistics, since it means the
/// null sampler is broken; integer counts legitimately collapse to zero.
inline double threshold_from_null(std::vector<double> null_stats, Direction direction,
                                  double fpr_target, bool integer_valued = false) {
  if (null_stats.empty()) throw ConfigError("calibration: empty null sample");
  if (!(fpr_target > 0.0 && fpr_target <= 0.5)) {
    throw ConfigError("calibration: fpr_target must lie in (0, 0.5]");
  }
  const auto [lo, hi] = std::minmax_element(null_stats.begin(), null_stats.end());
  if (*lo == *hi && !integer_valued) {
    throw NumericError("calibration: degenerate null distribution (all statistics equal)");
  }
  const auto n = null_stats.size();
  const auto k = static_cast<std::size_t>(std::floor(fpr_target * static_cast<double>(n) + 1e-9));
  if (direction == Direction::lower_detects) {
    std::sort(null_stats.begin(), null_stats.end());
    return null_stats[std::min(k, n - 1)];
  }
  std::sort(null_stats.begin(), null_stats.end(), std::greater<>());
  const double s = null_stats[std::min(k, n - 1)];
  return integer_valued ? s + 1.0 : std::nextafter(s, std::numeric_limits<double>::infinity());
}

/// The scheme statistic on one unwatermarked latent. SEAL draws a random
/// semantic embedding per trial since the null image has unrelated content.
inline double null_statistic(const WatermarkKey& key, std::uint64_t seed, std::uint64_t trial) {
  const LatentTensor z = sample_latent(mix_seed({seed, 0x6e756c6cULL, trial}), key_shape(key));
  std::optional<UnitVector> semantic;
  if (const auto* seal = std::get_if<SealKey>(&key)) {
    semantic = random_unit_vector(seal->embed_dim(), mix_seed({seed, 0x73656dULL, trial}));
  }
  return watermark_statistic(key, z, semantic);
}

inline std::vector<double> null_distribution(const WatermarkKey& key, int n_null, std::uint64_t seed) {
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_null));
  for (int i = 0; i < n_null; ++i) {
    stats.push_back(null_statistic(key, seed, static_cast<std::uint64_t>(i)));
  }
  return stats;
}

/// Samples `n_null` unwatermarked latents and returns the threshold meeting
/// `fpr_target`. Deterministic in `seed`.
inline double calibrate_threshold(const WatermarkKey& key, int n_null, double fpr_target,
                                  std::uint64_t seed) {
  if (n_null < 100) throw ConfigError("calibration: n_null must be >= 100");
  const Scheme scheme = scheme_of(key);
  return threshold_from_null(null_distribution(key, n_null, seed), detection_direction(scheme),
                             fpr_target, integer_statistic(scheme));
}

/// Calibrates and stores the threshold plus its provenance in the key.
inline void calibrate_key(WatermarkKey& key, int n_null, double fpr_target, std::uint64_t seed) {
  const double t = calibrate_threshold(key, n_null, fpr_target, seed);
  set_key_threshold(key, t, CalibrationInfo{fpr_target, n_null, seed});
}

}  // namespace csilab
