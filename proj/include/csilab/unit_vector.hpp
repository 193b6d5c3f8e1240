// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csilab/errors.hpp"

namespace csilab {

/// Vector on the unit sphere; every encoder output is one of these.
class UnitVector {
 public:
  static constexpr double kNormTolerance = 1e-6;

  UnitVector() = default;

  /// Scales `raw` to unit length. Throws NumericError on a zero or non-finite vector.
  static UnitVector normalize(std::vector<double> raw) {
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    const double n = std::sqrt(sq);
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalize a zero vector");
    for (double& v : raw) v /= n;
    return UnitVector(std::move(raw));
  }

  /// Wraps values that are already unit length; rejects anything else.
  static UnitVector from_unit(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > kNormTolerance) {
      throw ConfigError("vector is not unit-norm (norm " + std::to_string(std::sqrt(sq)) + ")");
    }
    return UnitVector(std::move(values));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  [[nodiscard]] UnitVector operator-() const {
    UnitVector out = *this;
    for (double& v : out.values_) v = -v;
    return out;
  }

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  explicit UnitVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

inline double cosine(const UnitVector& u, const UnitVector& v) {
  if (u.dim() != v.dim()) {
    throw ShapeError("cosine: dimension " + std::to_string(u.dim()) + " vs " +
                     std::to_string(v.dim()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) s += u[i] * v[i];
  return std::clamp(s, -1.0, 1.0);
}

}  // namespace csilab
