// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"
#include "csilab/unit_vector.hpp"

namespace csilab {

using BitString = std::vector<std::uint8_t>;

/// Random-hyperplane LSH: bit p is 1 iff <embedding, plane_p> >= 0.
inline BitString simhash(const UnitVector& embedding, std::span<const UnitVector> hyperplanes) {
  BitString bits(hyperplanes.size());
  for (std::size_t p = 0; p < hyperplanes.size(); ++p) {
    if (hyperplanes[p].dim() != embedding.dim()) {
      throw ShapeError("simhash: embedding dim " + std::to_string(embedding.dim()) +
                       " vs hyperplane dim " + std::to_string(hyperplanes[p].dim()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < embedding.dim(); ++i) s += embedding[i] * hyperplanes[p][i];
    bits[p] = s >= 0.0 ? 1 : 0;
  }
  return bits;
}

inline int hamming_distance(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw ShapeError("hamming: length mismatch");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

inline UnitVector random_unit_vector(std::size_t dim, std::uint64_t seed) {
  std::vector<double> v(dim);
  Rng rng(mix_seed({seed, 0x756e6974ULL}));
  fill_normal(std::span<double>(v), rng);
  return UnitVector::normalize(std::move(v));
}

struct SealConfig {
  Shape shape{4, 32, 32};
  int embed_dim = 64;
  int grid_rows = 8;
  int grid_cols = 8;
  double corr_cutoff = 0.5;
  double match_threshold = kReferenceSealMatchThreshold;
};

/// Content-aware key: one SimHash plane per spatial patch. Patch p's noise is
/// a PRF stream keyed by (prf_seed, p, bit_p), so flipping a semantic bit
/// swaps that patch for an independent one.
struct SealKey {
  Shape shape{};
  std::vector<UnitVector> hyperplanes;
  std::uint64_t prf_seed = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  double corr_cutoff = 0.5;
  double match_threshold = kReferenceSealMatchThreshold;
  std::optional<CalibrationInfo> calibration;

  [[nodiscard]] int patch_count() const noexcept { return grid_rows * grid_cols; }
  [[nodiscard]] std::size_t embed_dim() const noexcept {
    return hyperplanes.empty() ? 0 : hyperplanes.front().dim();
  }
  friend bool operator==(const SealKey&, const SealKey&) = default;
};

inline void validate(const SealKey& key) {
  if (!key.shape.valid()) throw ConfigError("seal: invalid shape");
  if (key.grid_rows < 1 || key.grid_cols < 1 || key.shape.height % key.grid_rows != 0 ||
      key.shape.width % key.grid_cols != 0) {
    throw ConfigError("seal: patch grid must evenly divide the latent");
  }
  if (static_cast<int>(key.hyperplanes.size()) != key.patch_count()) {
    throw ConfigError("seal: need exactly one hyperplane per patch");
  }
}

inline SealKey seal_keygen(const SealConfig& cfg, std::uint64_t seed) {
  SealKey key;
  key.shape = cfg.shape;
  key.grid_rows = cfg.grid_rows;
  key.grid_cols = cfg.grid_cols;
  key.corr_cutoff = cfg.corr_cutoff;
  key.match_threshold = cfg.match_threshold;
  if (cfg.embed_dim < 1) throw ConfigError("seal: embed_dim must be >= 1");
  if (!(cfg.corr_cutoff > -1.0 && cfg.corr_cutoff < 1.0)) {
    throw ConfigError("seal: corr_cutoff must lie in (-1, 1)");
  }
  key.prf_seed = mix_seed({seed, 0x7365616c707266ULL});
  for (int p = 0; p < cfg.grid_rows * cfg.grid_cols; ++p) {
    key.hyperplanes.push_back(random_unit_vector(
        static_cast<std::size_t>(cfg.embed_dim),
        mix_seed({seed, 0x706c616e65ULL, static_cast<std::uint64_t>(p)})));
  }
  validate(key);
  return key;
}

/// Latent indices of patch p (all channels of one spatial cell), in a fixed order.
inline std::vector<std::size_t> seal_patch_indices(const SealKey& key, int p) {
  const int ph = key.shape.height / key.grid_rows;
  const int pw = key.shape.width / key.grid_cols;
  const int row = p / key.grid_cols;
  const int col = p % key.grid_cols;
  std::vector<std::size_t> idx;
  idx.reserve(static_cast<std::size_t>(key.shape.channels * ph * pw));
  for (int c = 0; c < key.shape.channels; ++c) {
    for (int y = row * ph; y < (row + 1) * ph; ++y) {
      for (int x = col * pw; x < (col + 1) * pw; ++x) {
        idx.push_back((static_cast<std::size_t>(c) * key.shape.height + y) * key.shape.width + x);
      }
    }
  }
  return idx;
}

/// Builds the semantic-bound noise for an embedding; embed and reference share it.
inline LatentTensor seal_embed(const UnitVector& semantic_embedding, const SealKey& key) {
  validate(key);
  const BitString bits = simhash(semantic_embedding, key.hyperplanes);
  LatentTensor z(key.shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int p = 0; p < key.patch_count(); ++p) {
    Rng rng(mix_seed({key.prf_seed, static_cast<std::uint64_t>(p), bits[static_cast<std::size_t>(p)]}));
    for (std::size_t j : seal_patch_indices(key, p)) z[j] = static_cast<float>(normal(rng));
  }
  return z;
}

inline LatentTensor seal_reference(const UnitVector& semantic_embedding, const SealKey& key) {
  return seal_embed(semantic_embedding, key);
}

inline double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Per-patch Pearson correlations between the inverted noise and the reference.
inline std::vector<double> seal_patch_correlations(const SealKey& key, const LatentTensor& z_hat,
                                                   const LatentTensor& reference) {
  require_same_shape(z_hat.shape(), key.shape, "seal_detect");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(key.patch_count()));
  std::vector<double> a, b;
  for (int p = 0; p < key.patch_count(); ++p) {
    a.clear();
    b.clear();
    for (std::size_t j : seal_patch_indices(key, p)) {
      a.push_back(z_hat[j]);
      b.push_back(reference[j]);
    }
    out.push_back(pearson_correlation(a, b));
  }
  return out;
}

inline int seal_match_count(const SealKey& key, const LatentTensor& z_hat,
                            const UnitVector& image_embedding) {
  validate(key);
  const LatentTensor reference = seal_reference(image_embedding, key);
  int count = 0;
  for (double c : seal_patch_correlations(key, z_hat, reference)) count += c >= key.corr_cutoff;
  return count;
}

/// Counts patches whose correlation with the reference reaches corr_cutoff.
inline DetectionOutcome seal_detect(const SealKey& key, const LatentTensor& z_hat,
                                    const UnitVector& image_embedding) {
  return decide(Scheme::seal, static_cast<double>(seal_match_count(key, z_hat, image_embedding)),
                key.match_threshold);
}

}  // namespace csilab
