// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/diffusion.hpp"
#include "csilab/embedding.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/ledger.hpp"
#include "csilab/providers.hpp"
#include "csilab/random.hpp"
#include "csilab/text.hpp"
#include "csilab/unit_vector.hpp"

namespace csilab {

/// Inverted initial latent plus the per-step noises reused at regeneration.
struct CopiedNoise {
  LatentTensor z_T;
  StepNoises step_noises;
};

enum class Stage { proposed, text_passed, regenerated, accepted, rejected };

inline std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::proposed: return "proposed";
    case Stage::text_passed: return "text_passed";
    case Stage::regenerated: return "regenerated";
    case Stage::accepted: return "accepted";
    case Stage::rejected: return "rejected";
  }
  return "?";
}

struct ScoredCandidate {
  Prompt prompt;
  double s_text = 0.0;
  std::optional<LatentTensor> image;
  std::optional<Prompt> vf_caption;
  std::optional<double> s_vis;
  std::optional<double> delta_csw;
  double rank_score = 0.0;
  Stage stage = Stage::proposed;
  std::string rejected_at;  // "text" or "visual" when stage == rejected
  std::string reason;
};

struct AttackConfig {
  double tau_text = 0.85;
  double tau_vis = 0.80;
  double tau_csw = 0.35;
  double lambda_anc = 1.0;
  double lambda_attr = 1.0;
  int m_candidates = 16;

  void validate() const {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    if (!in(tau_text, -1.0, 1.0) || !in(tau_vis, -1.0, 1.0)) {
      throw ConfigError("attack: tau_text and tau_vis must lie in [-1, 1]");
    }
    if (!in(tau_csw, 0.0, 2.0)) throw ConfigError("attack: tau_csw must lie in [0, 2]");
    if (!std::isfinite(lambda_anc) || !std::isfinite(lambda_attr) || lambda_anc < 0 || lambda_attr < 0) {
      throw ConfigError("attack: ranking weights must be finite and >= 0");
    }
    if (m_candidates < 0) throw ConfigError("attack: m_candidates must be >= 0");
  }
};

/// Models and providers an attack runs against. Regenerated images are
/// registered in `ledger` (when set) so a ledger-backed captioner can see them.
struct AttackEnvironment {
  const NoiseSchedule& schedule;
  const DenoiserModel& model;
  const TextEncoder& text;
  const LatentEncoder& image;
  Captioner& captioner;
  Proposer& proposer;
  GenerationLedger* ledger = nullptr;
};

struct StageCounts {
  std::size_t proposed = 0;
  std::size_t text_passed = 0;
  std::size_t regenerated = 0;
  std::size_t accepted = 0;

  friend bool operator==(const StageCounts&, const StageCounts&) = default;
};

enum class AttackKind { none, csi, rpm };

inline std::string_view to_string(AttackKind k) noexcept {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::csi: return "csi";
    case AttackKind::rpm: return "rpm";
  }
  return "?";
}

inline AttackKind parse_attack(std::string_view tag) {
  for (AttackKind k : {AttackKind::none, AttackKind::csi, AttackKind::rpm}) {
    if (to_string(k) == tag) return k;
  }
  throw ConfigError("unknown attack '" + std::string(tag) + "' (expected none, csi or rpm)");
}

struct AttackResult {
  AttackKind kind = AttackKind::csi;
  LatentTensor x0;
  Prompt t0;
  std::vector<ScoredCandidate> candidates;  // pool order
  std::vector<std::size_t> accepted;        // indices into candidates, best first
  StageCounts counts;

  [[nodiscard]] const ScoredCandidate* best() const {
    return accepted.empty() ? nullptr : &candidates[accepted.front()];
  }
};

// ---------------------------------------------------------------------------

/// Recovers z_T by inversion under `cond`. Stochastic schedules need the
/// generation-time noises in `known_noises`; they are copied through.
inline CopiedNoise extract_noise(const LatentTensor& x0, const UnitVector& cond, const NoiseSchedule& schedule,
                                 const DenoiserModel& model, const StepNoises* known_noises = nullptr) {
  x0.check_finite();
  LatentTensor z = ddim_invert(x0, cond.values(), schedule, model, known_noises);
  StepNoises noises = known_noises != nullptr ? *known_noises : StepNoises::zeros(schedule.steps, x0.shape());
  return {std::move(z), std::move(noises)};
}

inline LatentTensor regenerate(const CopiedNoise& noise, const Prompt& prompt, const AttackEnvironment& env) {
  const UnitVector c = env.text.embed(prompt);
  return ddim_generate(noise.z_T, c.values(), env.schedule, env.model, &noise.step_noises).x0;
}

inline double csw_score(const LatentTensor& x, const CopiedNoise& noise, const LatentEncoder& enc) {
  return cosine(enc.embed_image(x), enc.embed_noise(noise.z_T, noise.step_noises));
}

/// Cosine between the anchor-masked prompts. A candidate keeping none of the
/// anchors scores 0.
inline double anchor_similarity(const UnitVector& anchored_t0, const Prompt& p, const AnchorSet& g,
                                const TextEncoder& text) {
  const Prompt masked = mask_anchors(p, g);
  if (masked.empty()) return 0.0;
  return cosine(anchored_t0, text.embed(masked));
}

inline UnitVector anchored_embedding(const Prompt& t0, const AnchorSet& g, const TextEncoder& text) {
  const Prompt masked = mask_anchors(t0, g);
  if (masked.empty()) throw ConfigError("none of the anchors occur in the original caption");
  return text.embed(masked);
}

inline std::vector<ScoredCandidate> filter_text(const std::vector<Prompt>& pool, const Prompt& t0,
                                                const AnchorSet& g, double tau_text, const TextEncoder& text) {
  const UnitVector ref = anchored_embedding(t0, g, text);
  std::vector<ScoredCandidate> out;
  out.reserve(pool.size());
  for (const auto& p : pool) {
    ScoredCandidate c;
    c.prompt = p;
    c.s_text = anchor_similarity(ref, p, g, text);
    if (c.s_text >= tau_text) {
      c.stage = Stage::text_passed;
    } else {
      c.stage = Stage::rejected;
      c.rejected_at = "text";
      c.reason = "s_text below tau_text";
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Regenerates every text-passed candidate from the copied noise, captions it,
/// and applies the anchor and CSW-discrepancy tests.
inline std::vector<ScoredCandidate> filter_visual(std::vector<ScoredCandidate> cands, const CopiedNoise& noise,
                                                  const Prompt& t0, const AnchorSet& g, double tau_vis,
                                                  double tau_csw, const AttackEnvironment& env) {
  const UnitVector ref = anchored_embedding(t0, g, env.text);
  const UnitVector noise_emb = env.image.embed_noise(noise.z_T, noise.step_noises);
  for (auto& c : cands) {
    if (c.stage != Stage::text_passed) continue;
    LatentTensor x = regenerate(noise, c.prompt, env);
    if (env.ledger != nullptr) env.ledger->add(x, c.prompt);
    c.image = std::move(x);
    c.stage = Stage::regenerated;
    try {
      c.vf_caption = env.captioner.caption(*c.image);
    } catch (const Error& e) {
      c.stage = Stage::rejected;
      c.rejected_at = "visual";
      c.reason = std::string("caption-error: ") + e.what();
      continue;
    }
    c.s_vis = anchor_similarity(ref, *c.vf_caption, g, env.text);
    c.delta_csw = 1.0 - cosine(env.image.embed_image(*c.image), noise_emb);
    if (*c.s_vis < tau_vis) {
      c.stage = Stage::rejected;
      c.rejected_at = "visual";
      c.reason = "s_vis below tau_vis";
    } else if (*c.delta_csw > tau_csw) {
      c.stage = Stage::rejected;
      c.rejected_at = "visual";
      c.reason = "delta_csw above tau_csw";
    } else {
      c.stage = Stage::accepted;
    }
  }
  return cands;
}

/// rank = lambda_attr * S_attr - lambda_anc * (1 - s_text), where S_attr is 1
/// when the target attribute is in the verification caption and otherwise its
/// embedding cosine with that caption.
inline double rank_score(const ScoredCandidate& c, const AttackIntent& intent, const AttackConfig& cfg,
                         const TextEncoder& text) {
  double s_attr = 0.0;
  const auto target = tokenize(intent.target_attribute);
  if (c.vf_caption && !target.empty()) {
    if (c.vf_caption->contains(target.front())) {
      s_attr = 1.0;
    } else if (!c.vf_caption->empty()) {
      s_attr = cosine(text.embed(Prompt::from_tokens(target)), text.embed(*c.vf_caption));
    }
  }
  return cfg.lambda_attr * s_attr - cfg.lambda_anc * (1.0 - c.s_text);
}

/// Scores and orders `accepted` by rank_score, descending; ties keep input order.
inline std::vector<ScoredCandidate> rank_candidates(std::vector<ScoredCandidate> accepted,
                                                    const AttackIntent& intent, const AttackConfig& cfg,
                                                    const TextEncoder& text) {
  for (auto& c : accepted) c.rank_score = rank_score(c, intent, cfg, text);
  std::stable_sort(accepted.begin(), accepted.end(),
                   [](const auto& a, const auto& b) { return a.rank_score > b.rank_score; });
  return accepted;
}

inline StageCounts count_stages(const std::vector<ScoredCandidate>& cands) {
  StageCounts n;
  n.proposed = cands.size();
  for (const auto& c : cands) {
    const bool rejected_text = c.stage == Stage::rejected && c.rejected_at == "text";
    if (c.stage != Stage::proposed && !rejected_text) ++n.text_passed;
    if (c.image) ++n.regenerated;
    if (c.stage == Stage::accepted) ++n.accepted;
  }
  return n;
}

/// Full CSI pipeline: invert under the caption, propose edits, filter by text,
/// regenerate from the copied noise, filter visually, rank.
inline AttackResult run_csi(const LatentTensor& x0, const Prompt& t0, const AnchorSet& g,
                            const AttackIntent& intent, const AttackConfig& cfg, const AttackEnvironment& env,
                            const StepNoises* known_noises = nullptr) {
  cfg.validate();
  if (g.empty()) throw ConfigError("run_csi: empty anchor set");
  if (!g.all_in(t0)) throw ConfigError("run_csi: anchors must all occur in the original caption");
  validate_intent(intent, g);

  AttackResult r;
  r.kind = AttackKind::csi;
  r.x0 = x0;
  r.t0 = t0;
  const CopiedNoise noise = extract_noise(x0, env.text.embed(t0), env.schedule, env.model, known_noises);
  std::vector<Prompt> pool;
  if (cfg.m_candidates > 0) pool = env.proposer.propose(t0, g, intent, cfg.m_candidates);

  r.candidates = filter_visual(filter_text(pool, t0, g, cfg.tau_text, env.text), noise, t0, g, cfg.tau_vis,
                               cfg.tau_csw, env);
  std::vector<ScoredCandidate> acc;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    auto& c = r.candidates[i];
    if (c.stage != Stage::accepted) continue;
    c.rank_score = rank_score(c, intent, cfg, env.text);
    idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return r.candidates[a].rank_score > r.candidates[b].rank_score;
  });
  r.accepted = std::move(idx);
  r.counts = count_stages(r.candidates);
  return r;
}

/// Baseline: caption x0 and regenerate from fresh noise. One candidate, no filtering.
inline AttackResult run_rpm(const LatentTensor& x0, const AttackEnvironment& env, std::uint64_t seed) {
  AttackResult r;
  r.kind = AttackKind::rpm;
  r.x0 = x0;
  r.t0 = env.captioner.caption(x0);
  const LatentTensor z = sample_latent(mix_seed({seed, 0x72706dULL}), x0.shape());
  const UnitVector c = env.text.embed(r.t0);
  LatentTensor x = ddim_generate(z, c.values(), env.schedule, env.model, nullptr,
                                 mix_seed({seed, 0x72706d31ULL}))
                       .x0;
  if (env.ledger != nullptr) env.ledger->add(x, r.t0);

  ScoredCandidate cand;
  cand.prompt = r.t0;
  cand.s_text = 1.0;
  cand.image = std::move(x);
  cand.vf_caption = r.t0;
  cand.stage = Stage::accepted;
  r.candidates.push_back(std::move(cand));
  r.accepted = {0};
  r.counts = count_stages(r.candidates);
  return r;
}

// ---------------------------------------------------------------------------

/// Structured report. `image_paths` maps candidate index to an emitted .lat file.
inline nlohmann::json attack_result_to_json(const AttackResult& r,
                                            const std::map<std::size_t, std::string>& image_paths = {}) {
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& c = r.candidates[i];
    nlohmann::json j = {{"index", i},
                        {"prompt", c.prompt.text()},
                        {"s_text", c.s_text},
                        {"stage", to_string(c.stage)},
                        {"rank_score", c.rank_score}};
    if (c.stage == Stage::rejected) {
      j["rejected_at"] = c.rejected_at;
      j["reason"] = c.reason;
    }
    if (c.vf_caption) j["vf_caption"] = c.vf_caption->text();
    if (c.s_vis) j["s_vis"] = *c.s_vis;
    if (c.delta_csw) j["delta_csw"] = *c.delta_csw;
    if (auto it = image_paths.find(i); it != image_paths.end()) j["image"] = it->second;
    cands.push_back(std::move(j));
  }
  return {{"attack", to_string(r.kind)},
          {"original_caption", r.t0.text()},
          {"counts",
           {{"proposed", r.counts.proposed},
            {"text_passed", r.counts.text_passed},
            {"regenerated", r.counts.regenerated},
            {"accepted", r.counts.accepted}}},
          {"attack_failed", r.accepted.empty()},
          {"accepted", r.accepted},
          {"candidates", std::move(cands)}};
}

}  // namespace csilab
