// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"

namespace csilab {
namespace {

using testing::Bench;
using testing::default_world;

const Prompt kPrompt = Prompt::parse("a red fox running through a snowy forest");
const AnchorSet kAnchors{"fox", "forest"};

AttackIntent blue() {
  AttackIntent i;
  i.target_attribute = "blue";
  i.replaced_attribute = "red";
  return i;
}

MockCaptionerOptions anchored_options() {
  MockCaptionerOptions o;
  o.anchor_vocabulary = kAnchors.tokens();
  return o;
}

// A generated image registered in the bench ledger.
LatentTensor seeded_image(Bench& b, std::uint64_t seed, const Prompt& prompt = kPrompt) {
  const auto x = default_world().generate(sample_latent(seed, default_world().shape()), prompt).x0;
  b.ledger.add(x, prompt, seed);
  return x;
}

CopiedNoise noise_of(const LatentTensor& x, const Prompt& p) {
  const auto& w = default_world();
  return extract_noise(x, w.text.embed(p), w.schedule, w.model);
}

TEST(ExtractNoise, RecoversInitialLatent) {
  const auto& w = default_world();
  const auto z = sample_latent(5, w.shape());
  const auto x = w.generate(z, kPrompt).x0;
  const auto n = noise_of(x, kPrompt);
  EXPECT_LT(max_abs_diff(n.z_T, z), 1e-5);
  EXPECT_TRUE(n.step_noises.all_zero());
  EXPECT_EQ(n.step_noises.steps(), w.schedule.steps);
  EXPECT_GT(max_abs_diff(noise_of(x, Prompt::parse("a cat")).z_T, z), 1e-3);
}

TEST(Regenerate, IdentityDeterminismAndSeparation) {
  Bench b;
  const auto x = seeded_image(b, 6);
  const auto n = noise_of(x, kPrompt);
  const auto again = regenerate(n, kPrompt, b.env);
  EXPECT_LT(max_abs_diff(again, x), 1e-4);
  const auto other = regenerate(n, Prompt::parse("a blue fox running through a snowy forest"), b.env);
  EXPECT_EQ(other, regenerate(n, Prompt::parse("a blue fox running through a snowy forest"), b.env));
  EXPECT_LT(cosine(default_world().image.embed_image(other), default_world().image.embed_image(x)), 1.0);
}

TEST(Csw, CopiedNoiseBeatsFreshNoise) {
  Bench b;
  const auto& w = default_world();
  const Prompt edited = Prompt::parse("a blue fox running through a snowy forest");
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = w.generate(sample_latent(s, w.shape()), kPrompt).x0;
    const auto n = noise_of(x, kPrompt);
    const auto copied = regenerate(n, edited, b.env);
    const auto fresh = w.generate(sample_latent(s + 5000, w.shape()), edited).x0;
    wins += csw_score(copied, n, w.image) > csw_score(fresh, n, w.image);
  }
  EXPECT_GE(wins, 90);
}

TEST(FilterText, Scores) {
  const auto& w = default_world();
  const std::vector<Prompt> pool{Prompt::parse("a blue fox in a forest"), Prompt::parse("a blue cat in a park"),
                                 Prompt::parse("forest only")};
  const auto all = filter_text(pool, kPrompt, kAnchors, 0.0, w.text);
  EXPECT_NEAR(all[0].s_text, 1.0, 1e-12);
  EXPECT_EQ(all[1].s_text, 0.0);
  EXPECT_LT(all[2].s_text, 1.0);
  EXPECT_EQ(all[0].stage, Stage::text_passed);
  EXPECT_EQ(all[1].stage, Stage::text_passed);
  const auto strict = filter_text(pool, kPrompt, kAnchors, 0.85, w.text);
  EXPECT_EQ(strict[0].stage, Stage::text_passed);
  EXPECT_EQ(strict[1].stage, Stage::rejected);
  EXPECT_EQ(strict[1].rejected_at, "text");
  EXPECT_EQ(strict[2].stage, Stage::rejected);
  EXPECT_TRUE(filter_text({}, kPrompt, kAnchors, 0.5, w.text).empty());
  EXPECT_THROW(filter_text(pool, kPrompt, AnchorSet{"cat"}, 0.5, w.text), ConfigError);
}

TEST(FilterText, DisjointAnchorsScoreNearZero) {
  const auto& w = default_world();
  int small = 0;
  for (int i = 0; i < 100; ++i) {
    const AnchorSet g{"a" + std::to_string(i), "b" + std::to_string(i)};
    const Prompt t0 = Prompt::parse("a" + std::to_string(i));
    const Prompt cand = Prompt::parse("b" + std::to_string(i));
    small += std::abs(anchor_similarity(anchored_embedding(t0, g, w.text), cand, g, w.text)) < 0.3;
  }
  EXPECT_GE(small, 95);
}

ScoredCandidate text_passed(const Prompt& p) {
  ScoredCandidate c;
  c.prompt = p;
  c.s_text = 1.0;
  c.stage = Stage::text_passed;
  return c;
}

TEST(FilterVisual, IdentityCandidateAccepted) {
  Bench b(anchored_options());
  const auto x = seeded_image(b, 8);
  const auto n = noise_of(x, kPrompt);
  const auto out = filter_visual({text_passed(kPrompt)}, n, kPrompt, kAnchors, 0.8, 0.35, b.env);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].stage, Stage::accepted);
  EXPECT_NEAR(*out[0].s_vis, 1.0, 1e-12);
  EXPECT_NEAR(*out[0].delta_csw, 1.0 - csw_score(*out[0].image, n, default_world().image), 1e-12);
}

TEST(FilterVisual, AnchorDropoutRejects) {
  MockCaptionerOptions o = anchored_options();
  o.anchor_dropout = 1.0;
  Bench b(o);
  const auto x = seeded_image(b, 9);
  const auto out = filter_visual({text_passed(kPrompt)}, noise_of(x, kPrompt), kPrompt, kAnchors, 0.8, 0.35, b.env);
  EXPECT_EQ(out[0].stage, Stage::rejected);
  EXPECT_EQ(out[0].rejected_at, "visual");
  EXPECT_LT(*out[0].s_vis, 0.8);
}

TEST(FilterVisual, CswBoundAtTwoIsVacuous) {
  Bench b(anchored_options());
  const auto x = seeded_image(b, 10);
  const auto n = noise_of(x, kPrompt);
  // A prompt that keeps the anchors but shares little else moves the image far.
  const Prompt far = Prompt::parse("fox forest zebra quantum violin cathedral");
  const auto loose = filter_visual({text_passed(far)}, n, kPrompt, kAnchors, -1.0, 2.0, b.env);
  EXPECT_EQ(loose[0].stage, Stage::accepted);
  EXPECT_LE(*loose[0].delta_csw, 2.0);
  const auto tight = filter_visual({text_passed(far)}, n, kPrompt, kAnchors, -1.0, 0.0, b.env);
  EXPECT_EQ(tight[0].stage, Stage::rejected);
}

// Captioner that always fails.
class BrokenCaptioner final : public Captioner {
 public:
  Prompt caption(const LatentTensor&) override { throw TransportError("caption service down"); }
};

TEST(FilterVisual, CaptionFailureRejectsCandidate) {
  const auto& w = default_world();
  BrokenCaptioner cap;
  MockProposer prop;
  const AttackEnvironment env{w.schedule, w.model, w.text, w.image, cap, prop, nullptr};
  const auto x = w.generate(sample_latent(1, w.shape()), kPrompt).x0;
  const auto out = filter_visual({text_passed(kPrompt)}, noise_of(x, kPrompt), kPrompt, kAnchors, 0.8, 0.35, env);
  EXPECT_EQ(out[0].stage, Stage::rejected);
  EXPECT_EQ(out[0].reason.rfind("caption-error", 0), 0u);
  EXPECT_TRUE(out[0].image.has_value());
}

TEST(Rank, FormulaAndOrdering) {
  const auto& w = default_world();
  AttackConfig cfg;
  cfg.lambda_attr = 0.7;
  ScoredCandidate c = text_passed(Prompt::parse("a blue fox"));
  c.vf_caption = Prompt::parse("a blue fox");
  EXPECT_DOUBLE_EQ(rank_score(c, blue(), cfg, w.text), 0.7);
  c.s_text = 0.9;
  EXPECT_DOUBLE_EQ(rank_score(c, blue(), cfg, w.text), 0.7 - 0.1);

  cfg.lambda_attr = 0.0;
  std::vector<ScoredCandidate> v(3, c);
  v[0].s_text = 0.5;
  v[1].s_text = 0.9;
  v[2].s_text = 0.7;
  const auto ranked = rank_candidates(v, blue(), cfg, w.text);
  EXPECT_EQ(ranked[0].s_text, 0.9);
  EXPECT_EQ(ranked[1].s_text, 0.7);
  EXPECT_EQ(ranked[2].s_text, 0.5);

  std::vector<ScoredCandidate> ties(3, c);
  ties[0].prompt = Prompt::parse("first");
  ties[1].prompt = Prompt::parse("second");
  ties[2].prompt = Prompt::parse("third");
  const auto tr = rank_candidates(ties, blue(), cfg, w.text);
  EXPECT_EQ(tr[0].prompt.text(), "first");
  EXPECT_EQ(tr[2].prompt.text(), "third");
}

bool monotone(const StageCounts& n) {
  return n.proposed >= n.text_passed && n.text_passed >= n.regenerated && n.regenerated >= n.accepted;
}

TEST(RunCsi, EndToEndAcceptsInjectedCandidates) {
  Bench b(anchored_options());
  const auto x = seeded_image(b, 11);
  const auto r = run_csi(x, kPrompt, kAnchors, blue(), AttackConfig{}, b.env);
  ASSERT_FALSE(r.accepted.empty());
  EXPECT_TRUE(monotone(r.counts));
  for (std::size_t i : r.accepted) {
    const auto& c = r.candidates[i];
    ASSERT_TRUE(c.vf_caption);
    EXPECT_TRUE(kAnchors.all_in(*c.vf_caption));
    EXPECT_TRUE(c.vf_caption->contains("blue"));
  }
  for (std::size_t k = 1; k < r.accepted.size(); ++k) {
    EXPECT_GE(r.candidates[r.accepted[k - 1]].rank_score, r.candidates[r.accepted[k]].rank_score);
  }
  const auto j = attack_result_to_json(r);
  EXPECT_EQ(j.at("counts").at("accepted").get<std::size_t>(), r.counts.accepted);
}

TEST(RunCsi, EmptyPoolAndBadAnchors) {
  Bench b(anchored_options());
  const auto x = seeded_image(b, 12);
  AttackConfig cfg;
  cfg.m_candidates = 0;
  const auto r = run_csi(x, kPrompt, kAnchors, blue(), cfg, b.env);
  EXPECT_EQ(r.counts.proposed, 0u);
  EXPECT_TRUE(r.accepted.empty());
  EXPECT_EQ(r.best(), nullptr);
  EXPECT_THROW(run_csi(x, kPrompt, AnchorSet{"cat"}, blue(), AttackConfig{}, b.env), ConfigError);
  cfg.tau_csw = 3.0;
  EXPECT_THROW(run_csi(x, kPrompt, kAnchors, blue(), cfg, b.env), ConfigError);
}

TEST(RunCsi, Deterministic) {
  Bench b1(anchored_options()), b2(anchored_options());
  const auto r1 = run_csi(seeded_image(b1, 13), kPrompt, kAnchors, blue(), AttackConfig{}, b1.env);
  const auto r2 = run_csi(seeded_image(b2, 13), kPrompt, kAnchors, blue(), AttackConfig{}, b2.env);
  EXPECT_EQ(attack_result_to_json(r1).dump(), attack_result_to_json(r2).dump());
  EXPECT_EQ(r1.accepted, r2.accepted);
}

std::set<std::string> accepted_prompts(const AttackResult& r) {
  std::set<std::string> s;
  for (std::size_t i : r.accepted) s.insert(r.candidates[i].prompt.text());
  return s;
}

TEST(RunCsi, TighteningThresholdsNeverGrowsAcceptedSet) {
  MockCaptionerOptions o = anchored_options();
  o.nonanchor_dropout = 0.2;
  for (int sweep = 0; sweep < 20; ++sweep) {
    Bench b(o);
    const auto x = seeded_image(b, 100 + static_cast<std::uint64_t>(sweep));
    AttackConfig loose;
    loose.tau_text = 0.5;
    loose.tau_vis = 0.5;
    loose.tau_csw = 0.6;
    loose.m_candidates = 24;
    const auto base = accepted_prompts(run_csi(x, kPrompt, kAnchors, blue(), loose, b.env));
    for (int which = 0; which < 3; ++which) {
      AttackConfig tight = loose;
      const double step = 0.025 * (sweep + 1);
      if (which == 0) tight.tau_text = std::min(1.0, loose.tau_text + step);
      if (which == 1) tight.tau_vis = std::min(1.0, loose.tau_vis + step);
      if (which == 2) tight.tau_csw = std::max(0.0, loose.tau_csw - step);
      const auto r = run_csi(x, kPrompt, kAnchors, blue(), tight, b.env);
      EXPECT_TRUE(monotone(r.counts));
      for (const auto& p : accepted_prompts(r)) EXPECT_TRUE(base.count(p)) << p;
    }
  }
}

TEST(RunRpm, FreshNoiseSingleCandidate) {
  Bench b(anchored_options());
  const auto& w = default_world();
  int differs = 0, lower_csw = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = seeded_image(b, 200 + s);
    const auto r = run_rpm(x, b.env, s);
    ASSERT_EQ(r.candidates.size(), 1u);
    ASSERT_EQ(r.accepted, std::vector<std::size_t>{0});
    const auto& img = *r.candidates[0].image;
    differs += cosine(w.image.embed_image(img), w.image.embed_image(x)) < 0.99;
    const auto n = noise_of(x, kPrompt);
    lower_csw += csw_score(img, n, w.image) < csw_score(regenerate(n, kPrompt, b.env), n, w.image);
    EXPECT_EQ(b.captioner.caption(img), kPrompt);
  }
  EXPECT_GE(differs, 19);
  EXPECT_EQ(lower_csw, 20);
}

TEST(AttackKinds, Parse) {
  EXPECT_EQ(parse_attack("rpm"), AttackKind::rpm);
  EXPECT_EQ(to_string(AttackKind::none), "none");
  EXPECT_THROW(parse_attack("lfa"), ConfigError);
}

}  // namespace
}  // namespace csilab
