// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"

namespace csilab {

struct WindConfig {
  Shape shape{4, 32, 32};
  int bank_size = 16;
  double max_pairwise_cosine = 0.2;
  int max_resample = 1000;
};

/// Secret bank of initial noises; detection looks for the closest entry.
struct WindKey {
  Shape shape{};
  std::vector<LatentTensor> bank;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::optional<CalibrationInfo> calibration;

  friend bool operator==(const WindKey& a, const WindKey& b) {
    const bool same_threshold =
        a.threshold == b.threshold || (std::isnan(a.threshold) && std::isnan(b.threshold));
    return a.shape == b.shape && a.bank == b.bank && same_threshold && a.calibration == b.calibration;
  }
};

inline WindKey wind_keygen(const WindConfig& cfg, std::uint64_t seed) {
  if (!cfg.shape.valid()) throw ConfigError("wind: invalid shape");
  if (cfg.bank_size < 1) throw ConfigError("wind: bank size must be >= 1");
  WindKey key;
  key.shape = cfg.shape;
  std::uint64_t draw = 0;
  for (int i = 0; i < cfg.bank_size; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= cfg.max_resample) {
        throw NumericError("wind: could not draw a bank entry below the similarity bound");
      }
      LatentTensor candidate = sample_latent(mix_seed({seed, 0x77696e64ULL, draw++}), cfg.shape);
      bool ok = true;
      for (const auto& prev : key.bank) {
        if (cosine_similarity(candidate, prev) >= cfg.max_pairwise_cosine) {
          ok = false;
          break;
        }
      }
      if (ok) {
        key.bank.push_back(std::move(candidate));
        break;
      }
    }
  }
  return key;
}

inline LatentTensor wind_embed(const WindKey& key, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= key.bank.size()) {
    throw ConfigError("wind: bank index " + std::to_string(index) + " out of range");
  }
  return key.bank[static_cast<std::size_t>(index)];
}

struct WindMatch {
  double cosine = -1.0;
  int index = -1;
};

inline WindMatch wind_best_match(const WindKey& key, const LatentTensor& z_hat) {
  if (key.bank.empty()) throw ConfigError("wind: empty noise bank");
  require_same_shape(z_hat.shape(), key.shape, "wind_detect");
  WindMatch best{-2.0, -1};
  const bool zero = l2_norm(z_hat) == 0.0;
  for (std::size_t j = 0; j < key.bank.size(); ++j) {
    const double c = zero ? 0.0 : cosine_similarity(z_hat, key.bank[j]);
    if (c > best.cosine) best = {c, static_cast<int>(j)};
  }
  return best;
}

/// Statistic is the best cosine against the bank; the argmax is reported too.
inline DetectionOutcome wind_detect(const WindKey& key, const LatentTensor& z_hat) {
  const WindMatch m = wind_best_match(key, z_hat);
  return decide(Scheme::wind, m.cosine, key.threshold, m.index);
}

}  // namespace csilab
