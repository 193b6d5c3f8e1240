// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/bundled_assets.hpp"
#include "csilab/errors.hpp"
#include "csilab/text.hpp"

namespace csilab {

/// One benchmark image recipe: prompt, its subject anchors, and the edit to inject.
struct CorpusEntry {
  Prompt prompt;
  AnchorSet anchors;
  AttackIntent intent;
};

inline std::vector<CorpusEntry> prompt_corpus_from_json(const nlohmann::json& j) {
  std::vector<CorpusEntry> out;
  try {
    for (const auto& e : j.at("prompts")) {
      CorpusEntry c;
      c.prompt = Prompt::parse(e.at("prompt").get<std::string>());
      const auto anchors = e.at("anchors").get<std::vector<std::string>>();
      c.anchors = AnchorSet(std::set<std::string>(anchors.begin(), anchors.end()));
      c.intent.target_attribute = e.at("target").get<std::string>();
      if (e.contains("replace")) c.intent.replaced_attribute = e.at("replace").get<std::string>();
      if (c.prompt.empty() || !c.anchors.all_in(c.prompt)) {
        throw ConfigError("prompt corpus: anchors of '" + c.prompt.raw + "' are not in the prompt");
      }
      validate_intent(c.intent, c.anchors);
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("prompt corpus: ") + e.what());
  }
  if (out.empty()) throw ConfigError("prompt corpus is empty");
  return out;
}

inline const std::vector<CorpusEntry>& bundled_prompt_corpus() {
  static const std::vector<CorpusEntry> corpus =
      prompt_corpus_from_json(nlohmann::json::parse(assets::kPromptCorpus));
  return corpus;
}

}  // namespace csilab
