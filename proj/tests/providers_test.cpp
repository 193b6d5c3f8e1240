// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"

namespace csilab {
namespace {

TEST(Text, TokenizeLowercasesAndSplits) {
  EXPECT_EQ(tokenize("A Red  fox, running!"), (std::vector<std::string>{"a", "red", "fox", "running"}));
  EXPECT_TRUE(tokenize("  ,. ").empty());
}

TEST(Text, MaskAnchors) {
  const Prompt p = Prompt::parse("a red fox running");
  EXPECT_EQ(mask_anchors(p, AnchorSet{"fox"}).tokens, std::vector<std::string>{"fox"});
  EXPECT_EQ(mask_anchors(p, AnchorSet{"a", "red", "fox", "running", "extra"}).tokens, p.tokens);
  EXPECT_TRUE(mask_anchors(p, AnchorSet{"cat"}).empty());
}

TEST(Text, IntentValidation) {
  AttackIntent intent;
  intent.target_attribute = "blue";
  EXPECT_NO_THROW(validate_intent(intent, AnchorSet{"fox"}));
  intent.target_attribute = "fox";
  EXPECT_THROW(validate_intent(intent, AnchorSet{"fox"}), ConfigError);
  intent.target_attribute = "two words";
  EXPECT_THROW(validate_intent(intent, AnchorSet{"fox"}), ConfigError);
}

TEST(TextEncoder, DeterministicBagOfTokens) {
  const TextEncoder enc(64, 5);
  const auto a = enc.embed(Prompt::parse("a red fox"));
  EXPECT_EQ(a.values()[0], enc.embed(Prompt::parse("a red fox")).values()[0]);
  EXPECT_NEAR(cosine(a, enc.embed(Prompt::parse("fox red a a"))), 1.0, 1e-12);
  EXPECT_THROW(enc.embed(Prompt{}), ConfigError);
  double norm = 0.0;
  for (double v : a.values()) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(TextEncoder, DistinctTokensConcentrateNearOrthogonal) {
  const TextEncoder enc(64, 5);
  int small = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    for (int j = i + 1; j < 200; j += 7) {
      const double c = cosine(enc.embed(Prompt::parse("w" + std::to_string(i))),
                              enc.embed(Prompt::parse("w" + std::to_string(j))));
      small += std::abs(c) < 0.3;
      ++total;
    }
  }
  // For d = 64 the cosine of random directions has sd 1/8, so |c| >= 0.3 is a 2.4 sigma event (~1.6%).
  EXPECT_GE(static_cast<double>(small) / total, 0.97);
}

TEST(Cosine, Cases) {
  std::vector<double> e1(4, 0.0), e2(4, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  const auto u = UnitVector::normalize(e1);
  EXPECT_EQ(cosine(u, UnitVector::normalize(e2)), 0.0);
  EXPECT_NEAR(cosine(u, u), 1.0, 1e-15);
  EXPECT_NEAR(cosine(u, -u), -1.0, 1e-15);
  EXPECT_THROW(UnitVector::normalize(std::vector<double>(4, 0.0)), Error);
}

TEST(LatentEncoder, ImageEmbeddingProperties) {
  const auto& w = testing::default_world();
  const auto x = sample_latent(12, w.shape());
  const auto e = w.image.embed_image(x);
  EXPECT_EQ(cosine(e, w.image.embed_image(x)), cosine(e, e));
  EXPECT_NEAR(cosine(w.image.embed_image(linear_combination(-1.0, x, 0.0, x)), e), -1.0, 1e-12);
  const auto d = sample_latent(13, w.shape());
  const auto pert = linear_combination(1.0, x, 0.01 * l2_norm(x) / l2_norm(d), d);
  EXPECT_GT(cosine(w.image.embed_image(pert), e), 0.999);
  EXPECT_THROW(w.image.embed_image(LatentTensor(w.shape())), Error);
}

TEST(MockCaptioner, ReturnsGeneratingPrompt) {
  GenerationLedger ledger;
  const auto x = sample_latent(1, Shape{4, 32, 32});
  ledger.add(x, Prompt::parse("a red fox running"));
  MockCaptioner cap(ledger);
  EXPECT_EQ(cap.caption(x).text(), "a red fox running");
  EXPECT_THROW(cap.caption(sample_latent(2, Shape{4, 32, 32})), LookupError);
}

TEST(MockCaptioner, FullNonAnchorDropoutLeavesAnchors) {
  GenerationLedger ledger;
  const auto x = sample_latent(1, Shape{4, 32, 32});
  ledger.add(x, Prompt::parse("a red fox running through a snowy forest"));
  MockCaptionerOptions o;
  o.nonanchor_dropout = 1.0;
  o.anchor_vocabulary = {"fox", "forest"};
  MockCaptioner cap(ledger, o);
  EXPECT_EQ(cap.caption(x).text(), "fox forest");
  o.nonanchor_dropout = 0.0;
  o.anchor_dropout = 1.0;
  MockCaptioner cap2(ledger, o);
  EXPECT_EQ(cap2.caption(x).text(), "a red running through a snowy");
  o.anchor_dropout = 1.5;
  EXPECT_THROW(MockCaptioner(ledger, o), ConfigError);
}

TEST(MockCaptioner, PartialDropoutIsDeterministicPerImage) {
  GenerationLedger ledger;
  const auto x = sample_latent(1, Shape{4, 32, 32});
  ledger.add(x, Prompt::parse("one two three four five six seven eight nine ten"));
  MockCaptionerOptions o;
  o.nonanchor_dropout = 0.5;
  MockCaptioner cap(ledger, o);
  const auto first = cap.caption(x);
  EXPECT_EQ(cap.caption(x), first);
  EXPECT_LT(first.tokens.size(), 10u);
}

TEST(MockCaptioner, NearestFallbackToleratesSmallNoise) {
  GenerationLedger ledger;
  const Shape s{4, 32, 32};
  for (std::uint64_t i = 0; i < 10; ++i) ledger.add(sample_latent(i, s), Prompt::parse("prompt " + std::to_string(i)));
  MockCaptionerOptions o;
  o.nearest_fallback = true;
  MockCaptioner cap(ledger, o);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto noisy = linear_combination(1.0, sample_latent(i, s), 1e-3, sample_latent(100 + i, s));
    EXPECT_EQ(cap.caption(noisy).text(), "prompt " + std::to_string(i));
  }
}

AttackIntent intent_for(std::string target, std::optional<std::string> replace = std::nullopt) {
  AttackIntent i;
  i.target_attribute = std::move(target);
  i.replaced_attribute = std::move(replace);
  return i;
}

TEST(MockProposer, FoxExample) {
  MockProposer prop(AttributeTable::bundled(), 1);
  const auto out = prop.propose(Prompt::parse("a red fox running"), AnchorSet{"fox"}, intent_for("blue"), 5);
  ASSERT_EQ(out.size(), 5u);
  std::set<std::string> distinct;
  for (const auto& p : out) {
    distinct.insert(p.text());
    EXPECT_TRUE(p.contains("fox")) << p.text();
    EXPECT_TRUE(p.contains("blue")) << p.text();
    EXPECT_FALSE(p.contains("red")) << p.text();
  }
  EXPECT_EQ(distinct.size(), 5u);
  EXPECT_EQ(out.front().text(), "a blue fox running");
}

TEST(MockProposer, KeepsAnchorsAcrossCorpus) {
  MockProposer prop(AttributeTable::bundled(), 2);
  for (const auto& e : bundled_prompt_corpus()) {
    const auto out = prop.propose(e.prompt, e.anchors, e.intent, 16);
    ASSERT_FALSE(out.empty()) << e.prompt.text();
    for (const auto& p : out) {
      EXPECT_TRUE(e.anchors.all_in(p)) << p.text();
      EXPECT_TRUE(p.contains(e.intent.target_attribute)) << p.text();
    }
  }
}

TEST(MockProposer, CountsAndErrors) {
  MockProposer prop;
  const Prompt p = Prompt::parse("a red fox running");
  EXPECT_EQ(prop.propose(p, AnchorSet{"fox"}, intent_for("blue"), 1).size(), 1u);
  EXPECT_THROW(prop.propose(p, AnchorSet{"fox"}, intent_for("blue"), 0), ConfigError);
  EXPECT_THROW(prop.propose(p, AnchorSet{"fox"}, intent_for("zzzz"), 3), ConfigError);
  // No same-category modifier: the target is inserted before the anchor.
  const auto ins = prop.propose(Prompt::parse("a fox running"), AnchorSet{"fox"}, intent_for("blue"), 1);
  EXPECT_EQ(ins.front().text(), "a blue fox running");
  // Same seed, same output.
  EXPECT_EQ(prop.propose(p, AnchorSet{"fox"}, intent_for("blue"), 8),
            prop.propose(p, AnchorSet{"fox"}, intent_for("blue"), 8));
}

TEST(MetaPrompt, RendersBothSlots) {
  const std::string tmpl = bundled_meta_prompt();
  EXPECT_NE(tmpl.find("[Name]"), std::string::npos);
  EXPECT_NE(tmpl.find("[Modification Target]"), std::string::npos);
  const std::string out = render_meta_prompt(tmpl, AnchorSet{"fox", "forest"}, intent_for("blue", "red"));
  EXPECT_EQ(out.find("[Name]"), std::string::npos);
  EXPECT_EQ(out.find("[Modification Target]"), std::string::npos);
  EXPECT_NE(out.find("forest, fox"), std::string::npos);
  EXPECT_NE(out.find("change 'red' to 'blue'"), std::string::npos);
  EXPECT_EQ(render_meta_prompt("[Name]/[Name]", AnchorSet{"a"}, intent_for("b")), "a/a");
}

TEST(Ledger, SaveLoadRoundTrip) {
  GenerationLedger ledger;
  const auto x = sample_latent(4, Shape{1, 4, 4});
  const auto dir = testing::scratch_dir("ledger");
  write_lat(dir / "x.lat", x);
  ledger.add(x, Prompt::parse("hello world"), 7, (dir / "x.lat").string());
  ledger.add(sample_latent(5, Shape{1, 4, 4}), Prompt::parse("in memory only"));
  ledger.save(dir / "l.json");
  GenerationLedger back;
  back.load(dir / "l.json");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back.find_exact(x)->text(), "hello world");
  std::filesystem::remove(dir / "x.lat");
  EXPECT_THROW(GenerationLedger().load(dir / "l.json"), IoError);
}

}  // namespace
}  // namespace csilab
