// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "csilab/calibration.hpp"
#include "csilab/config.hpp"
#include "csilab/diffusion.hpp"
#include "csilab/embedding.hpp"
#include "csilab/keys.hpp"
#include "csilab/providers.hpp"
#include "csilab/text.hpp"

namespace csilab {

/// The model plus both encoders, built once from a RunConfig.
struct World {
  NoiseSchedule schedule;
  DenoiserModel model;
  TextEncoder text;
  LatentEncoder image;

  explicit World(const RunConfig& cfg)
      : schedule(make_schedule(cfg.diffusion.steps, cfg.diffusion.beta_min, cfg.diffusion.beta_max,
                               cfg.diffusion.eta)),
        model(DenoiserConfig{cfg.diffusion.shape, cfg.diffusion.cond_dim, cfg.diffusion.gamma,
                             cfg.diffusion.model_seed}),
        text(cfg.diffusion.cond_dim, cfg.encoders.text_seed),
        image(cfg.diffusion.shape, cfg.diffusion.steps, cfg.encoders.image_dim, cfg.encoders.image_seed) {}

  [[nodiscard]] const Shape& shape() const noexcept { return model.shape(); }

  [[nodiscard]] GenerationOutput generate(const LatentTensor& z_T, const Prompt& prompt,
                                          std::uint64_t noise_seed = 0) const {
    return ddim_generate(z_T, text.embed(prompt).values(), schedule, model, nullptr, noise_seed);
  }

  [[nodiscard]] LatentTensor invert(const LatentTensor& x, const Prompt& prompt,
                                    const StepNoises* noises = nullptr) const {
    return ddim_invert(x, text.embed(prompt).values(), schedule, model, noises);
  }
};

inline WatermarkKey make_key(Scheme scheme, const SchemeSettings& s, std::uint64_t seed) {
  switch (scheme) {
    case Scheme::trw: return trw_keygen(s.trw, seed);
    case Scheme::gsw: return gsw_keygen(s.gsw, seed);
    case Scheme::wind: return wind_keygen(s.wind, seed);
    case Scheme::seal: return seal_keygen(s.seal, seed);
  }
  throw ConfigError("unknown scheme");
}

/// Fresh key with a threshold calibrated at the configured false-positive rate.
inline WatermarkKey make_calibrated_key(Scheme scheme, const RunConfig& cfg, std::uint64_t seed) {
  WatermarkKey key = make_key(scheme, cfg.schemes, seed);
  calibrate_key(key, cfg.calibration.n_null, cfg.calibration.fpr, mix_seed({seed, 0x63616cULL}));
  return key;
}

/// Embeds the watermark in z_T for `prompt` and runs generation.
inline GenerationOutput generate_watermarked(const WatermarkKey& key, const World& world, const Prompt& prompt,
                                             std::uint64_t seed, int index = 0) {
  EmbedRequest req;
  req.seed = seed;
  if (const auto* w = std::get_if<WindKey>(&key)) {
    req.bank_index = index % static_cast<int>(w->bank.size());
  }
  if (scheme_of(key) == Scheme::seal) req.semantic = world.text.embed(prompt);
  const LatentTensor z_T = embed_watermark(key, req);
  return world.generate(z_T, prompt, mix_seed({seed, 0x6e6f697365ULL}));
}

struct ImageDetection {
  DetectionOutcome outcome;
  Prompt caption;
};

/// Captions the image, inverts under that caption and runs the detector.
/// SEAL compares against the caption's embedding.
inline ImageDetection detect_image(const WatermarkKey& key, const World& world, Captioner& captioner,
                                   const LatentTensor& x, const StepNoises* noises = nullptr) {
  ImageDetection d;
  d.caption = captioner.caption(x);
  const UnitVector c = world.text.embed(d.caption);
  const LatentTensor z_hat = ddim_invert(x, c.values(), world.schedule, world.model, noises);
  std::optional<UnitVector> semantic;
  if (scheme_of(key) == Scheme::seal) semantic = c;
  d.outcome = detect_watermark(key, z_hat, semantic);
  return d;
}

inline AttributeTable attribute_table_for(const RunConfig& cfg) {
  return cfg.provider.mock.attribute_table.empty() ? AttributeTable::bundled()
                                                   : AttributeTable::from_file(cfg.provider.mock.attribute_table);
}

inline MockCaptionerOptions mock_captioner_options(const RunConfig& cfg, const AnchorSet* anchors = nullptr) {
  MockCaptionerOptions o;
  o.nonanchor_dropout = cfg.provider.mock.nonanchor_dropout;
  o.anchor_dropout = cfg.provider.mock.anchor_dropout;
  o.nearest_fallback = cfg.provider.mock.nearest_fallback;
  o.seed = mix_seed({cfg.seed, 0x63617074ULL});
  if (anchors != nullptr) o.anchor_vocabulary = anchors->tokens();
  return o;
}

}  // namespace csilab
