// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"

namespace csilab {

struct GswConfig {
  Shape shape{4, 32, 32};
  int bits = 64;
};

/// K-bit sign-shading key.
///
/// Latent entries are split into K equal blocks by the permutation
/// `block_order` (block k is entries block_order[k*B .. (k+1)*B)). Entry j of
/// block k carries sign bit `bits[k] ^ sign_mask[j]`, so the watermarked
/// latent keeps standard-normal marginals even though each block votes for
/// a single bit.
struct GswKey {
  Shape shape{};
  std::vector<std::uint8_t> bits;
  std::vector<std::uint32_t> block_order;
  std::vector<std::uint8_t> sign_mask;
  double threshold = kReferenceGswThreshold;
  std::optional<CalibrationInfo> calibration;

  [[nodiscard]] int bit_count() const noexcept { return static_cast<int>(bits.size()); }
  [[nodiscard]] std::size_t block_size() const noexcept {
    return bits.empty() ? 0 : block_order.size() / bits.size();
  }
  friend bool operator==(const GswKey&, const GswKey&) = default;
};

inline void validate(const GswKey& key) {
  const std::size_t n = key.shape.size();
  if (key.bits.empty() || n % key.bits.size() != 0) {
    throw ConfigError("gsw: bit count must divide the latent size");
  }
  if (key.block_order.size() != n || key.sign_mask.size() != n) {
    throw ConfigError("gsw: block map does not cover the latent");
  }
  std::vector<bool> seen(n, false);
  for (auto j : key.block_order) {
    if (j >= n || seen[j]) throw ConfigError("gsw: block map is not a partition");
    seen[j] = true;
  }
}

inline GswKey gsw_keygen(const GswConfig& cfg, std::uint64_t seed) {
  if (!cfg.shape.valid()) throw ConfigError("gsw: invalid shape");
  const std::size_t n = cfg.shape.size();
  if (cfg.bits < 1 || n % static_cast<std::size_t>(cfg.bits) != 0) {
    throw ConfigError("gsw: K=" + std::to_string(cfg.bits) + " does not divide latent size " +
                      std::to_string(n));
  }
  GswKey key;
  key.shape = cfg.shape;
  Rng rng(mix_seed({seed, 0x67737721ULL}));
  std::bernoulli_distribution coin(0.5);
  key.bits.resize(static_cast<std::size_t>(cfg.bits));
  for (auto& b : key.bits) b = coin(rng) ? 1 : 0;
  key.block_order.resize(n);
  std::iota(key.block_order.begin(), key.block_order.end(), 0u);
  std::shuffle(key.block_order.begin(), key.block_order.end(), rng);
  key.sign_mask.resize(n);
  for (auto& m : key.sign_mask) m = coin(rng) ? 1 : 0;
  return key;
}

/// Half-normal magnitudes from `seed` with signs set by the key's bits.
inline LatentTensor gsw_embed(const GswKey& key, std::uint64_t seed) {
  validate(key);
  LatentTensor z = sample_latent(seed, key.shape);
  const std::size_t block = key.block_size();
  for (std::size_t pos = 0; pos < key.block_order.size(); ++pos) {
    const std::size_t j = key.block_order[pos];
    const bool positive = (key.bits[pos / block] ^ key.sign_mask[j]) != 0;
    const float mag = std::abs(z[j]);
    z[j] = positive ? mag : -mag;
  }
  return z;
}

/// Majority-sign decoding per block. Exact ties fall back to the sign of the
/// mask-corrected sum so the null decode stays unbiased.
inline std::vector<std::uint8_t> gsw_decode(const GswKey& key, const LatentTensor& z_hat) {
  validate(key);
  require_same_shape(z_hat.shape(), key.shape, "gsw_detect");
  const std::size_t block = key.block_size();
  std::vector<std::uint8_t> out(key.bits.size());
  for (std::size_t k = 0; k < key.bits.size(); ++k) {
    std::size_t ones = 0;
    double soft = 0.0;
    for (std::size_t pos = k * block; pos < (k + 1) * block; ++pos) {
      const std::size_t j = key.block_order[pos];
      const bool positive = z_hat[j] > 0.0f;
      if (positive != (key.sign_mask[j] != 0)) ++ones;
      soft += key.sign_mask[j] != 0 ? -z_hat[j] : z_hat[j];
    }
    if (2 * ones > block) {
      out[k] = 1;
    } else if (2 * ones < block) {
      out[k] = 0;
    } else {
      out[k] = soft > 0.0 ? 1 : 0;
    }
  }
  return out;
}

inline double gsw_bit_accuracy(const GswKey& key, const LatentTensor& z_hat) {
  const auto decoded = gsw_decode(key, z_hat);
  std::size_t match = 0;
  for (std::size_t k = 0; k < decoded.size(); ++k) match += decoded[k] == key.bits[k];
  return static_cast<double>(match) / static_cast<double>(decoded.size());
}

inline DetectionOutcome gsw_detect(const GswKey& key, const LatentTensor& z_hat) {
  return decide(Scheme::gsw, gsw_bit_accuracy(key, z_hat), key.threshold);
}

}  // namespace csilab
