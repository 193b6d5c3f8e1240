// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP-backed providers. Requires cpp-httplib (link the csilab_remote target).

#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

// Note: <resolv.h>, reached from here, defines a _res macro that clashes with
// Eigen internals. Include Eigen-based headers before this one.
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "csilab/encoding.hpp"
#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/providers.hpp"
#include "csilab/remote_config.hpp"
#include "csilab/text.hpp"

namespace csilab {

/// Response bodies on disk, one <sha256 of request>.json per request.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string request_key(std::string_view url, std::string_view body) {
    std::string material;
    material.reserve(url.size() + body.size() + 1);
    material.append(url).push_back('\n');
    material.append(body);
    return sha256_hex(material);
  }

  [[nodiscard]] std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

  [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void put(const std::string& key, const std::string& body) {
    std::lock_guard lock(mutex_);
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    const auto final_path = path_for(key);
    const auto tmp = final_path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cache: cannot write " + tmp);
      out << body;
    }
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) throw IoError("cache: cannot store " + final_path.string() + ": " + ec.message());
  }

  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

/// JSON POST client with the on-disk cache in front of the network.
class RemoteClient {
 public:
  explicit RemoteClient(RemoteConfig cfg)
      : cfg_(std::move(cfg)), cache_(cfg_.cache_dir), slots_(cfg_.max_in_flight) {
    cfg_.validate();
  }

  /// Returns the raw response body for POST {base_url}{path}.
  std::string post(const std::string& base_url, const std::string& path, const std::string& body) {
    const std::string url = base_url + path;
    const std::string key = ResponseCache::request_key(url, body);
    if (auto hit = cache_.get(key)) return *hit;
    if (cfg_.offline) throw TransportError("remote: no cached response for " + url + " in offline mode");

    const auto [origin, prefix] = split_url(base_url);
    httplib::Headers headers;
    if (const char* k = std::getenv(cfg_.api_key_env.c_str()); k != nullptr && *k != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + k);
    }
    slots_.acquire();
    httplib::Result res;
    try {
      httplib::Client cli(origin);
      cli.set_connection_timeout(cfg_.timeout_seconds, 0);
      cli.set_read_timeout(cfg_.timeout_seconds, 0);
      cli.set_write_timeout(cfg_.timeout_seconds, 0);
      res = cli.Post(prefix + path, headers, body, "application/json");
    } catch (...) {
      slots_.release();
      throw;
    }
    slots_.release();
    if (!res) throw TransportError("remote: request to " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw TransportError("remote: " + url + " returned HTTP " + std::to_string(res->status));
    }
    cache_.put(key, res->body);
    return res->body;
  }

  [[nodiscard]] const RemoteConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] ResponseCache& cache() noexcept { return cache_; }

  /// "https://host:port/v1" -> {"https://host:port", "/v1"}.
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("remote: base url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
  }

 private:
  RemoteConfig cfg_;
  ResponseCache cache_;
  std::counting_semaphore<1024> slots_;
};

/// Splits a completion into candidate prompts: one per non-empty line, with
/// list numbering, bullets and surrounding quotes removed. Duplicates dropped.
inline std::vector<Prompt> parse_candidate_lines(std::string_view content) {
  static const std::regex marker(R"(^\s*(?:\d+\s*[.):-]|[-*]|\xE2\x80\xA2)\s*)", std::regex::ECMAScript);
  std::vector<Prompt> out;
  std::unordered_set<std::string> seen;
  std::istringstream in{std::string(content)};
  for (std::string line; std::getline(in, line);) {
    line = std::regex_replace(line, marker, "", std::regex_constants::format_first_only);
    auto p = Prompt::parse(line);
    while (!p.raw.empty() && std::isspace(static_cast<unsigned char>(p.raw.back()))) p.raw.pop_back();
    while (!p.raw.empty() && std::isspace(static_cast<unsigned char>(p.raw.front()))) p.raw.erase(0, 1);
    if (p.raw.size() >= 2 && (p.raw.front() == '"' || p.raw.front() == '\'') && p.raw.back() == p.raw.front()) {
      p.raw = p.raw.substr(1, p.raw.size() - 2);
    }
    if (p.empty() || !seen.insert(p.text()).second) continue;
    out.push_back(std::move(p));
  }
  if (out.empty()) throw ParseError("proposer: response contained no candidate lines");
  return out;
}

/// Proposer backed by an OpenAI-compatible chat-completions endpoint.
class RemoteProposer final : public Proposer {
 public:
  RemoteProposer(std::shared_ptr<RemoteClient> client, std::string meta_prompt = bundled_meta_prompt())
      : client_(std::move(client)), meta_prompt_(std::move(meta_prompt)) {}

  [[nodiscard]] std::string request_body(const Prompt& original, const AnchorSet& anchors,
                                         const AttackIntent& intent, int m) const {
    const auto& cfg = client_->config();
    const std::string user = "Original prompt: " + original.raw + "\nWrite " + std::to_string(m) +
                             " candidate prompts, one per line, with no other text.";
    nlohmann::json body = {
        {"model", cfg.model},
        {"temperature", cfg.temperature},
        {"messages",
         {{{"role", "system"}, {"content", render_meta_prompt(meta_prompt_, anchors, intent)}},
          {{"role", "user"}, {"content", user}}}}};
    return body.dump();
  }

  std::vector<Prompt> propose(const Prompt& original, const AnchorSet& anchors, const AttackIntent& intent,
                              int m) override {
    if (m < 1) throw ConfigError("propose: candidate count must be >= 1");
    validate_intent(intent, anchors);
    const std::string raw =
        client_->post(client_->config().base_url, "/chat/completions", request_body(original, anchors, intent, m));
    std::string content;
    try {
      content = nlohmann::json::parse(raw).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("proposer: malformed chat-completions response: ") + e.what());
    }
    auto out = parse_candidate_lines(content);
    if (static_cast<int>(out.size()) > m) out.resize(static_cast<std::size_t>(m));
    return out;
  }

 private:
  std::shared_ptr<RemoteClient> client_;
  std::string meta_prompt_;
};

/// Captioner backed by POST {caption_base_url}/caption with
/// {"model", "latent": <.lat text>} -> {"caption": "..."}.
class RemoteCaptioner final : public Captioner {
 public:
  explicit RemoteCaptioner(std::shared_ptr<RemoteClient> client) : client_(std::move(client)) {}

  Prompt caption(const LatentTensor& x) override {
    const auto& cfg = client_->config();
    const std::string base = cfg.caption_base_url.empty() ? cfg.base_url : cfg.caption_base_url;
    const nlohmann::json body = {{"model", cfg.caption_model}, {"latent", to_lat_string(x)}};
    const std::string raw = client_->post(base, "/caption", body.dump());
    try {
      auto p = Prompt::parse(nlohmann::json::parse(raw).at("caption").get<std::string>());
      if (p.empty()) throw ParseError("captioner: empty caption");
      return p;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("captioner: malformed response: ") + e.what());
    }
  }

 private:
  std::shared_ptr<RemoteClient> client_;
};

/// Remote captioner and proposer sharing one client (and so one cache and
/// one in-flight limit).
inline ProviderSet make_remote_providers(const RemoteConfig& cfg) {
  auto client = std::make_shared<RemoteClient>(cfg);
  ProviderSet p;
  p.captioner = std::make_unique<RemoteCaptioner>(client);
  p.proposer = std::make_unique<RemoteProposer>(client);
  return p;
}

}  // namespace csilab
