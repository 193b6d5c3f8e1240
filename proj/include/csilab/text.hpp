// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csilab/errors.hpp"

namespace csilab {

/// Lowercase ASCII tokens split on whitespace and punctuation.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

struct Prompt {
  std::string raw;
  std::vector<std::string> tokens;

  static Prompt parse(std::string_view text) { return Prompt{std::string(text), tokenize(text)}; }
  static Prompt from_tokens(std::vector<std::string> tokens) {
    std::string raw = join_tokens(tokens);
    return Prompt{std::move(raw), std::move(tokens)};
  }

  [[nodiscard]] bool empty() const noexcept { return tokens.empty(); }
  [[nodiscard]] bool contains(std::string_view token) const {
    return std::find(tokens.begin(), tokens.end(), token) != tokens.end();
  }
  /// Canonical form used for de-duplication and display.
  [[nodiscard]] std::string text() const { return join_tokens(tokens); }

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// Global semantic anchors: the subject tokens an edit must keep.
class AnchorSet {
 public:
  AnchorSet() = default;
  explicit AnchorSet(std::set<std::string> anchors) : anchors_(std::move(anchors)) {
    if (anchors_.empty()) throw ConfigError("anchor set must not be empty");
  }
  AnchorSet(std::initializer_list<std::string> anchors) : AnchorSet(std::set<std::string>(anchors)) {}

  /// Parses a comma- or whitespace-separated list.
  static AnchorSet parse(std::string_view text) {
    auto tokens = tokenize(text);
    return AnchorSet(std::set<std::string>(tokens.begin(), tokens.end()));
  }

  [[nodiscard]] bool contains(std::string_view token) const {
    return anchors_.find(std::string(token)) != anchors_.end();
  }
  [[nodiscard]] const std::set<std::string>& tokens() const noexcept { return anchors_; }
  [[nodiscard]] bool empty() const noexcept { return anchors_.empty(); }

  /// True when every anchor token occurs in `p`.
  [[nodiscard]] bool all_in(const Prompt& p) const {
    return std::all_of(anchors_.begin(), anchors_.end(), [&](const auto& a) { return p.contains(a); });
  }

  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;

 private:
  std::set<std::string> anchors_;
};

struct AttackIntent {
  std::string target_attribute;
  std::optional<std::string> replaced_attribute;
  std::string description;

  /// Free-text form used to fill the modification slot of the meta-prompt.
  [[nodiscard]] std::string modification_text() const {
    if (!description.empty()) return description;
    if (replaced_attribute) return "change '" + *replaced_attribute + "' to '" + target_attribute + "'";
    return "add the attribute '" + target_attribute + "'";
  }
};

inline void validate_intent(const AttackIntent& intent, const AnchorSet& anchors) {
  const auto tokens = tokenize(intent.target_attribute);
  if (tokens.size() != 1) throw ConfigError("target attribute must be a single token");
  if (anchors.contains(tokens.front())) {
    throw ConfigError("target attribute '" + tokens.front() + "' is one of the anchors");
  }
}

/// Keeps only anchor tokens, preserving order. May return an empty prompt.
inline Prompt mask_anchors(const Prompt& p, const AnchorSet& g) {
  std::vector<std::string> kept;
  for (const auto& t : p.tokens) {
    if (g.contains(t)) kept.push_back(t);
  }
  return Prompt::from_tokens(std::move(kept));
}

}  // namespace csilab
