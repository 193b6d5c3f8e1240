// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "csilab/diffusion.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"
#include "csilab/text.hpp"
#include "csilab/unit_vector.hpp"

namespace csilab {

/// Bag-of-tokens feature hashing. Each distinct token maps to a signed
/// pseudorandom unit direction; a prompt embeds to the normalized sum over its
/// token set, so order and multiplicity are ignored.
class TextEncoder {
 public:
  explicit TextEncoder(int dim = 64, std::uint64_t seed = 0x7465787431ULL) : dim_(dim), seed_(seed) {
    if (dim_ < 1) throw ConfigError("text encoder: dim must be >= 1");
  }

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  [[nodiscard]] std::vector<double> token_direction(std::string_view token) const {
    const std::uint64_t h = fnv1a64(token);
    Rng rng(mix_seed({seed_, h}));
    std::vector<double> v(static_cast<std::size_t>(dim_));
    fill_normal(std::span<double>(v), rng);
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double sign = (splitmix64(h ^ seed_) & 1U) != 0 ? -1.0 : 1.0;
    const double scale = sign / std::sqrt(sq);
    for (double& x : v) x *= scale;
    return v;
  }

  [[nodiscard]] UnitVector embed(const Prompt& p) const {
    if (p.empty()) throw ConfigError("text encoder: cannot embed an empty prompt");
    const std::set<std::string> unique(p.tokens.begin(), p.tokens.end());
    std::vector<double> sum(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& t : unique) {
      const auto d = token_direction(t);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
    }
    return UnitVector::normalize(std::move(sum));
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Fixed pseudorandom linear projections of latents.
///
/// embed_image projects one tensor with matrix R. embed_noise projects the
/// concatenation [z_T, eps_1, ..., eps_T] with [R, R_1, ..., R_T]; the z_T
/// block reuses R so images and the noise that produced them share a space.
/// Step blocks are materialized on first use with nonzero step noise.
class LatentEncoder {
 public:
  LatentEncoder(Shape shape, int steps, int dim = 64, std::uint64_t seed = 0x696d6731ULL)
      : shape_(shape), steps_(steps), dim_(dim), seed_(seed), lazy_(std::make_shared<Lazy>()) {
    if (!shape_.valid()) throw ConfigError("latent encoder: invalid shape");
    if (dim_ < 1 || steps_ < 0) throw ConfigError("latent encoder: bad dim or step count");
    image_proj_ = make_block(0);
  }

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }

  [[nodiscard]] UnitVector embed_image(const LatentTensor& x) const {
    require_same_shape(x.shape(), shape_, "embed_image");
    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    project_into(acc, image_proj_, x);
    return normalize_or_throw(std::move(acc));
  }

  [[nodiscard]] UnitVector embed_noise(const LatentTensor& z_T, const StepNoises& noises) const {
    require_same_shape(z_T.shape(), shape_, "embed_noise");
    if (!noises.noises.empty() && noises.steps() != steps_) {
      throw ShapeError("embed_noise: expected " + std::to_string(steps_) + " step noises");
    }
    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    project_into(acc, image_proj_, z_T);
    for (int t = 0; t < noises.steps(); ++t) {
      const auto& n = noises.noises[static_cast<std::size_t>(t)];
      require_same_shape(n.shape(), shape_, "embed_noise");
      if (n.is_zero()) continue;
      project_into(acc, step_block(t), n);
    }
    return normalize_or_throw(std::move(acc));
  }

 private:
  struct Lazy {
    std::once_flag once;
    std::vector<std::vector<double>> blocks;
  };

  [[nodiscard]] std::vector<double> make_block(int block) const {
    std::vector<double> m(static_cast<std::size_t>(dim_) * shape_.size());
    Rng rng(mix_seed({seed_, 0x70726f6aULL, static_cast<std::uint64_t>(block)}));
    fill_normal(std::span<double>(m), rng);
    return m;
  }

  [[nodiscard]] const std::vector<double>& step_block(int t) const {
    std::call_once(lazy_->once, [this] {
      lazy_->blocks.reserve(static_cast<std::size_t>(steps_));
      for (int s = 1; s <= steps_; ++s) lazy_->blocks.push_back(make_block(s));
    });
    return lazy_->blocks[static_cast<std::size_t>(t)];
  }

  void project_into(std::vector<double>& acc, const std::vector<double>& m, const LatentTensor& x) const {
    const std::size_t n = shape_.size();
    for (std::size_t r = 0; r < acc.size(); ++r) {
      const double* row = m.data() + r * n;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += row[i] * x[i];
      acc[r] += s;
    }
  }

  static UnitVector normalize_or_throw(std::vector<double> v) {
    try {
      return UnitVector::normalize(std::move(v));
    } catch (const NumericError&) {
      throw NumericError("latent encoder: input projects to zero (all-zero tensor?)");
    }
  }

  Shape shape_;
  int steps_;
  int dim_;
  std::uint64_t seed_;
  std::vector<double> image_proj_;
  std::shared_ptr<Lazy> lazy_;
};

}  // namespace csilab
