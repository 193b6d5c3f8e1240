// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/fft.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"

namespace csilab {

struct TrwConfig {
  Shape shape{4, 32, 32};
  int channel = 0;
  double inner_radius = 4.0;
  double outer_radius = 10.0;
  double magnitude = 30.0;
};

/// Ring key: Fourier coefficients of one channel overwritten with a fixed
/// pattern. `mask` holds one canonical index per conjugate pair (the
/// half-spectrum); the conjugate partner always receives conj(pattern).
struct TrwKey {
  Shape shape{};
  int channel = 0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  double magnitude = 0.0;
  std::vector<int> mask;
  std::vector<std::complex<double>> pattern;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::optional<CalibrationInfo> calibration;

  friend bool operator==(const TrwKey& a, const TrwKey& b) {
    auto same_double = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.shape == b.shape && a.channel == b.channel && a.inner_radius == b.inner_radius &&
           a.outer_radius == b.outer_radius && a.magnitude == b.magnitude && a.mask == b.mask &&
           a.pattern == b.pattern && same_double(a.threshold, b.threshold) &&
           a.calibration == b.calibration;
  }
};

namespace detail {

inline int conjugate_index(int k, int height, int width) {
  const int u = k / width;
  const int v = k % width;
  return ((height - u) % height) * width + (width - v) % width;
}

inline double centered_radius(int k, int height, int width) {
  const int u = k / width;
  const int v = k % width;
  const int fu = u < (height + 1) / 2 ? u : u - height;
  const int fv = v < (width + 1) / 2 ? v : v - width;
  return std::hypot(static_cast<double>(fu), static_cast<double>(fv));
}

}  // namespace detail

inline TrwKey trw_keygen(const TrwConfig& cfg, std::uint64_t seed) {
  if (!cfg.shape.valid()) throw ConfigError("trw: invalid shape");
  if (cfg.channel < 0 || cfg.channel >= cfg.shape.channels) throw ConfigError("trw: channel out of range");
  if (!(cfg.inner_radius >= 0.0) || !(cfg.outer_radius >= cfg.inner_radius)) {
    throw ConfigError("trw: need 0 <= inner_radius <= outer_radius");
  }
  if (!(cfg.magnitude > 0.0)) throw ConfigError("trw: magnitude must be positive");

  TrwKey key;
  key.shape = cfg.shape;
  key.channel = cfg.channel;
  key.inner_radius = cfg.inner_radius;
  key.outer_radius = cfg.outer_radius;
  key.magnitude = cfg.magnitude;

  const int h = cfg.shape.height;
  const int w = cfg.shape.width;
  Rng rng(mix_seed({seed, 0x74727721ULL}));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < h * w; ++k) {
    const double r = detail::centered_radius(k, h, w);
    if (r < cfg.inner_radius || r > cfg.outer_radius) continue;
    const int kc = detail::conjugate_index(k, h, w);
    if (kc < k) continue;
    key.mask.push_back(k);
    if (kc == k) {
      // Self-conjugate bins must stay real.
      key.pattern.emplace_back(phase(rng) < std::numbers::pi ? cfg.magnitude : -cfg.magnitude, 0.0);
    } else {
      key.pattern.push_back(std::polar(cfg.magnitude, phase(rng)));
    }
  }
  if (key.mask.empty()) throw ConfigError("trw: ring mask is empty for these radii");
  return key;
}

/// Complex spatial plane after writing the ring pattern into the spectrum.
/// Its imaginary part is round-off only; exposed for the realness check.
inline Spectrum trw_patterned_plane(const TrwKey& key, const LatentTensor& base) {
  require_same_shape(base.shape(), key.shape, "trw");
  if (key.mask.empty()) throw ConfigError("trw: empty mask");
  const int h = key.shape.height;
  const int w = key.shape.width;
  const auto offset = base.index(key.channel, 0, 0);
  std::vector<double> plane(base.data().begin() + static_cast<std::ptrdiff_t>(offset),
                            base.data().begin() + static_cast<std::ptrdiff_t>(offset + h * w));
  Spectrum spec = fft2(plane, h, w);
  for (std::size_t i = 0; i < key.mask.size(); ++i) {
    const int k = key.mask[i];
    spec[static_cast<std::size_t>(k)] = key.pattern[i];
    spec[static_cast<std::size_t>(detail::conjugate_index(k, h, w))] = std::conj(key.pattern[i]);
  }
  return ifft2(std::move(spec), h, w);
}

/// Fresh Gaussian latent (from `seed`) with the ring pattern written in.
inline LatentTensor trw_embed(const TrwKey& key, std::uint64_t seed) {
  LatentTensor z = sample_latent(seed, key.shape);
  const Spectrum spatial = trw_patterned_plane(key, z);
  const auto offset = z.index(key.channel, 0, 0);
  for (std::size_t i = 0; i < spatial.size(); ++i) {
    z[offset + i] = static_cast<float>(spatial[i].real());
  }
  z.check_finite();
  return z;
}

/// Mean |Z_k - pattern_k| over the ring mask of the channel's spectrum.
inline double trw_distance(const TrwKey& key, const LatentTensor& z_hat) {
  require_same_shape(z_hat.shape(), key.shape, "trw_detect");
  if (key.mask.empty()) throw ConfigError("trw: empty mask");
  const int h = key.shape.height;
  const int w = key.shape.width;
  const auto offset = z_hat.index(key.channel, 0, 0);
  std::vector<double> plane(z_hat.data().begin() + static_cast<std::ptrdiff_t>(offset),
                            z_hat.data().begin() + static_cast<std::ptrdiff_t>(offset + h * w));
  const Spectrum spec = fft2(plane, h, w);
  double total = 0.0;
  for (std::size_t i = 0; i < key.mask.size(); ++i) {
    total += std::abs(spec[static_cast<std::size_t>(key.mask[i])] - key.pattern[i]);
  }
  return total / static_cast<double>(key.mask.size());
}

inline DetectionOutcome trw_detect(const TrwKey& key, const LatentTensor& z_hat) {
  return decide(Scheme::trw, trw_distance(key, z_hat), key.threshold);
}

}  // namespace csilab
