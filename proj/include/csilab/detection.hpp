// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "csilab/errors.hpp"

namespace csilab {

enum class Scheme { trw, gsw, wind, seal };

inline constexpr Scheme kAllSchemes[] = {Scheme::trw, Scheme::gsw, Scheme::wind, Scheme::seal};

inline std::string_view to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::trw: return "trw";
    case Scheme::gsw: return "gsw";
    case Scheme::wind: return "wind";
    case Scheme::seal: return "seal";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view tag) {
  for (Scheme s : kAllSchemes) {
    if (to_string(s) == tag) return s;
  }
  throw ConfigError("unknown scheme '" + std::string(tag) + "' (expected trw, gsw, wind or seal)");
}

// TRW accepts small distances; the other three accept large scores.
enum class Direction { lower_detects, higher_detects };

constexpr Direction detection_direction(Scheme s) noexcept {
  return s == Scheme::trw ? Direction::lower_detects : Direction::higher_detects;
}

// SEAL's statistic is a patch count; the others are continuous.
constexpr bool integer_statistic(Scheme s) noexcept { return s == Scheme::seal; }

// Reference thresholds reported for full-size models. Desk-scale keys are
// calibrated instead because statistic magnitudes depend on latent size.
inline constexpr double kReferenceGswThreshold = 0.71;
inline constexpr double kReferenceSealMatchThreshold = 12.0;

struct CalibrationInfo {
  double fpr_target = 0.0;
  int n_null = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const CalibrationInfo&, const CalibrationInfo&) = default;
};

struct DetectionOutcome {
  Scheme scheme = Scheme::trw;
  double statistic = 0.0;
  double threshold = 0.0;
  bool detected = false;
  /// Signed distance to the threshold, positive on the accepting side.
  double margin = 0.0;
  /// Best-matching bank entry (WIND only).
  std::optional<int> matched_index;

  friend bool operator==(const DetectionOutcome&, const DetectionOutcome&) = default;
};

inline DetectionOutcome decide(Scheme scheme, double statistic, double threshold,
                               std::optional<int> matched_index = std::nullopt) {
  if (std::isnan(threshold)) {
    throw ConfigError(std::string(to_string(scheme)) + " key has no threshold; calibrate it first");
  }
  DetectionOutcome out;
  out.scheme = scheme;
  out.statistic = statistic;
  out.threshold = threshold;
  out.matched_index = matched_index;
  if (detection_direction(scheme) == Direction::lower_detects) {
    out.detected = statistic < threshold;
    out.margin = threshold - statistic;
  } else {
    out.detected = statistic >= threshold;
    out.margin = statistic - threshold;
  }
  return out;
}

}  // namespace csilab
