// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"
#include "csilab/text.hpp"

namespace csilab {

/// Record of every latent generated in a run and the prompt behind it.
/// The mock captioner answers from here. Safe for concurrent use.
class GenerationLedger {
 public:
  struct Entry {
    LatentTensor image;
    Prompt prompt;
    std::uint64_t seed = 0;
    std::string path;  // empty for images never written to disk
  };

  GenerationLedger() = default;
  GenerationLedger(const GenerationLedger&) = delete;
  GenerationLedger& operator=(const GenerationLedger&) = delete;

  void add(LatentTensor image, Prompt prompt, std::uint64_t seed = 0, std::string path = {}) {
    const std::uint64_t h = content_hash(image);
    std::unique_lock lock(mutex_);
    by_hash_.emplace(h, entries_.size());
    entries_.push_back(Entry{std::move(image), std::move(prompt), seed, std::move(path)});
  }

  /// Prompt of the most recent bit-identical registration.
  [[nodiscard]] std::optional<Prompt> find_exact(const LatentTensor& x) const {
    const std::uint64_t h = content_hash(x);
    std::shared_lock lock(mutex_);
    std::optional<std::size_t> best;
    auto [lo, hi] = by_hash_.equal_range(h);
    for (auto it = lo; it != hi; ++it) {
      if (entries_[it->second].image == x && (!best || it->second > *best)) best = it->second;
    }
    if (!best) return std::nullopt;
    return entries_[*best].prompt;
  }

  /// Prompt of the registered latent closest in L2 (same shape only).
  [[nodiscard]] std::optional<Prompt> find_nearest(const LatentTensor& x) const {
    std::shared_lock lock(mutex_);
    double best_d = std::numeric_limits<double>::infinity();
    const Entry* best = nullptr;
    for (const auto& e : entries_) {
      if (e.image.shape() != x.shape()) continue;
      double d = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = static_cast<double>(e.image[i]) - x[i];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = &e;
      }
    }
    if (best == nullptr) return std::nullopt;
    return best->prompt;
  }

  [[nodiscard]] std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  [[nodiscard]] std::vector<Entry> entries() const {
    std::shared_lock lock(mutex_);
    return entries_;
  }

  /// Writes entries that have a path; paths are stored relative to the ledger file.
  void save(const std::filesystem::path& file) const {
    namespace fs = std::filesystem;
    const fs::path base = fs::absolute(file).parent_path();
    nlohmann::json list = nlohmann::json::array();
    {
      std::shared_lock lock(mutex_);
      for (const auto& e : entries_) {
        if (e.path.empty()) continue;
        std::error_code ec;
        fs::path rel = fs::relative(fs::absolute(e.path), base, ec);
        if (ec || rel.empty()) rel = fs::absolute(e.path);
        list.push_back({{"image", rel.generic_string()}, {"prompt", e.prompt.raw}, {"seed", e.seed}});
      }
    }
    nlohmann::json doc = {{"format", "csilab-ledger"}, {"version", 1}, {"entries", list}};
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open ledger " + file.string() + " for writing");
    out << doc.dump(2) << "\n";
  }

  /// Appends the entries of a ledger file, reading each referenced .lat.
  void load(const std::filesystem::path& file) {
    namespace fs = std::filesystem;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open ledger " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(ss.str());
      if (doc.value("format", "") != "csilab-ledger") throw FormatError("not a csilab ledger");
      const fs::path base = fs::absolute(file).parent_path();
      for (const auto& e : doc.at("entries")) {
        fs::path img = e.at("image").get<std::string>();
        if (img.is_relative()) img = base / img;
        add(read_lat(img), Prompt::parse(e.at("prompt").get<std::string>()),
            e.value("seed", std::uint64_t{0}), img.lexically_normal().string());
      }
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("ledger " + file.string() + ": " + ex.what());
    }
  }

 private:
  static std::uint64_t content_hash(const LatentTensor& x) {
    const auto bytes = std::string_view(reinterpret_cast<const char*>(x.data().data()),
                                        x.size() * sizeof(float));
    return mix_seed({fnv1a64(bytes), static_cast<std::uint64_t>(x.shape().channels),
                     static_cast<std::uint64_t>(x.shape().height),
                     static_cast<std::uint64_t>(x.shape().width)});
  }

  mutable std::shared_mutex mutex_;
  std::vector<Entry> entries_;
  std::unordered_multimap<std::uint64_t, std::size_t> by_hash_;
};

}  // namespace csilab
