// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/bundled_assets.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/ledger.hpp"
#include "csilab/random.hpp"
#include "csilab/text.hpp"

namespace csilab {

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual Prompt caption(const LatentTensor& x) = 0;
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  /// Up to `m` distinct edited prompts derived from `original`.
  virtual std::vector<Prompt> propose(const Prompt& original, const AnchorSet& anchors,
                                      const AttackIntent& intent, int m) = 0;
};

struct ProviderSet {
  std::unique_ptr<Captioner> captioner;
  std::unique_ptr<Proposer> proposer;
};

// ---------------------------------------------------------------------------

/// Attribute categories (interchangeable modifiers) and synonym lists.
struct AttributeTable {
  std::map<std::string, std::vector<std::string>> categories;
  std::map<std::string, std::vector<std::string>> synonyms;

  static AttributeTable from_json(const nlohmann::json& j) {
    AttributeTable t;
    try {
      for (const auto& [name, words] : j.at("attributes").items()) {
        t.categories[name] = words.get<std::vector<std::string>>();
      }
      if (j.contains("synonyms")) {
        for (const auto& [word, alts] : j.at("synonyms").items()) {
          t.synonyms[word] = alts.get<std::vector<std::string>>();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("attribute table: ") + e.what());
    }
    return t;
  }

  static AttributeTable bundled() { return from_json(nlohmann::json::parse(assets::kAttributeTable)); }

  static AttributeTable from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open attribute table " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("attribute table " + path.string() + ": " + e.what());
    }
  }

  [[nodiscard]] std::optional<std::string> category_of(std::string_view token) const {
    for (const auto& [name, words] : categories) {
      if (std::find(words.begin(), words.end(), token) != words.end()) return name;
    }
    return std::nullopt;
  }

  /// Synonyms first, then other members of the token's category.
  [[nodiscard]] std::vector<std::string> alternatives(const std::string& token) const {
    std::vector<std::string> out;
    if (auto it = synonyms.find(token); it != synonyms.end()) out = it->second;
    if (auto cat = category_of(token)) {
      for (const auto& w : categories.at(*cat)) {
        if (w != token && std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------

struct MockCaptionerOptions {
  double nonanchor_dropout = 0.0;
  double anchor_dropout = 0.0;
  /// Tokens treated as anchors when applying the two dropout rates.
  std::set<std::string> anchor_vocabulary;
  bool nearest_fallback = false;
  std::uint64_t seed = 0;
};

/// Captions by looking the latent up in the generation ledger.
class MockCaptioner final : public Captioner {
 public:
  explicit MockCaptioner(const GenerationLedger& ledger, MockCaptionerOptions opts = {})
      : ledger_(ledger), opts_(std::move(opts)) {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(opts_.nonanchor_dropout) || !in_unit(opts_.anchor_dropout)) {
      throw ConfigError("caption dropout must lie in [0, 1]");
    }
  }

  Prompt caption(const LatentTensor& x) override {
    std::optional<Prompt> found = ledger_.find_exact(x);
    if (!found && opts_.nearest_fallback) found = ledger_.find_nearest(x);
    if (!found) throw LookupError("caption: latent is not registered in the generation ledger");
    if (opts_.nonanchor_dropout == 0.0 && opts_.anchor_dropout == 0.0) return *found;

    const auto bytes = std::string_view(reinterpret_cast<const char*>(x.data().data()),
                                        x.size() * sizeof(float));
    Rng rng(mix_seed({opts_.seed, fnv1a64(bytes), 0x63617074ULL}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> kept;
    for (const auto& t : found->tokens) {
      const bool anchor = opts_.anchor_vocabulary.count(t) > 0;
      const double p = anchor ? opts_.anchor_dropout : opts_.nonanchor_dropout;
      if (u(rng) >= p) kept.push_back(t);
    }
    return Prompt::from_tokens(std::move(kept));
  }

  MockCaptionerOptions& options() noexcept { return opts_; }

 private:
  const GenerationLedger& ledger_;
  MockCaptionerOptions opts_;
};

// ---------------------------------------------------------------------------

/// Deterministic stand-in for the LLM proposer.
///
/// Edit space, in output order:
///   1. base edits: swap the replaced attribute (or any same-category
///      modifier) for the target; failing that, insert the target before
///      each anchor;
///   2. one non-anchor substitution from the table on top of a base edit;
///   3. two substitutions.
/// Groups 2 and 3 are shuffled by the provider seed. Anchor tokens and the
/// injected target are never touched.
class MockProposer final : public Proposer {
 public:
  explicit MockProposer(AttributeTable table = AttributeTable::bundled(), std::uint64_t seed = 0)
      : table_(std::move(table)), seed_(seed) {}

  std::vector<Prompt> propose(const Prompt& original, const AnchorSet& anchors,
                              const AttackIntent& intent, int m) override {
    if (m < 1) throw ConfigError("propose: candidate count must be >= 1");
    validate_intent(intent, anchors);
    const std::string target = tokenize(intent.target_attribute).front();
    const auto target_cat = table_.category_of(target);
    if (!target_cat) throw ConfigError("mock proposer: attribute table has no entry for '" + target + "'");
    std::optional<std::string> replaced;
    if (intent.replaced_attribute) {
      const auto r = tokenize(*intent.replaced_attribute);
      if (!r.empty()) replaced = r.front();
    }

    using Tokens = std::vector<std::string>;
    const Tokens& base = original.tokens;
    std::vector<Tokens> bases;
    {
      Tokens swapped = base;
      bool any = false;
      for (auto& t : swapped) {
        if (anchors.contains(t) || t == target) continue;
        if ((replaced && t == *replaced) || table_.category_of(t) == target_cat) {
          t = target;
          any = true;
        }
      }
      if (any) bases.push_back(std::move(swapped));
      std::set<std::string> seen_anchor;
      for (std::size_t i = 0; i < base.size() && !any; ++i) {
        if (!anchors.contains(base[i]) || !seen_anchor.insert(base[i]).second) continue;
        if (i > 0 && base[i - 1] == target) continue;
        Tokens ins = base;
        ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(i), target);
        bases.push_back(std::move(ins));
      }
      if (bases.empty() && original.contains(target)) bases.push_back(base);
    }

    auto editable = [&](const std::string& t) { return !anchors.contains(t) && t != target; };
    auto alternatives = [&](const std::string& t) {
      std::vector<std::string> alts;
      for (auto& a : table_.alternatives(t)) {
        if (a != target && table_.category_of(a) != target_cat && !anchors.contains(a)) alts.push_back(a);
      }
      return alts;
    };

    std::vector<Tokens> singles, pairs;
    for (const auto& b : bases) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (!editable(b[j])) continue;
        for (const auto& a : alternatives(b[j])) {
          Tokens v = b;
          v[j] = a;
          singles.push_back(v);
          for (std::size_t k = j + 1; k < b.size(); ++k) {
            if (!editable(b[k])) continue;
            for (const auto& a2 : alternatives(b[k])) {
              Tokens w = v;
              w[k] = a2;
              pairs.push_back(std::move(w));
            }
          }
        }
      }
    }
    Rng rng(mix_seed({seed_, fnv1a64(original.text()), fnv1a64(target)}));
    std::shuffle(singles.begin(), singles.end(), rng);
    std::shuffle(pairs.begin(), pairs.end(), rng);

    std::vector<Prompt> out;
    std::unordered_set<std::string> seen{original.text()};
    auto take = [&](const std::vector<Tokens>& group) {
      for (const auto& t : group) {
        if (static_cast<int>(out.size()) >= m) return;
        Prompt p = Prompt::from_tokens(t);
        if (seen.insert(p.text()).second) out.push_back(std::move(p));
      }
    };
    take(bases);
    take(singles);
    take(pairs);
    if (out.empty() && original.contains(target)) out.push_back(original);
    return out;
  }

 private:
  AttributeTable table_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------

inline std::string bundled_meta_prompt() {
  std::string t(assets::kMetaPrompt);
  while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
  return t;
}

/// Fills the [Name] and [Modification Target] slots of a meta-prompt template.
inline std::string render_meta_prompt(std::string tmpl, const AnchorSet& anchors,
                                      const AttackIntent& intent) {
  std::string names;
  for (const auto& a : anchors.tokens()) {
    if (!names.empty()) names += ", ";
    names += a;
  }
  auto replace_all = [&](std::string_view slot, const std::string& value) {
    for (std::size_t pos = tmpl.find(slot); pos != std::string::npos;
         pos = tmpl.find(slot, pos + value.size())) {
      tmpl.replace(pos, slot.size(), value);
    }
  };
  replace_all("[Name]", names);
  replace_all("[Modification Target]", intent.modification_text());
  return tmpl;
}

}  // namespace csilab
