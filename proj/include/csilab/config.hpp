// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/csi.hpp"
#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/gaussian_shading.hpp"
#include "csilab/latent.hpp"
#include "csilab/remote_config.hpp"
#include "csilab/seal.hpp"
#include "csilab/tree_ring.hpp"
#include "csilab/wind.hpp"

namespace csilab {

struct DiffusionSettings {
  Shape shape{4, 32, 32};
  int steps = 10;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  double eta = 0.0;
  double gamma = 0.1;
  int cond_dim = 64;  // also the text-embedding and SEAL dimension
  std::uint64_t model_seed = 1234;
};

struct EncoderSettings {
  int image_dim = 64;
  std::uint64_t text_seed = 0x7465787431ULL;
  std::uint64_t image_seed = 0x696d6731ULL;
};

struct SchemeSettings {
  TrwConfig trw;
  GswConfig gsw;
  WindConfig wind;
  SealConfig seal;
  /// Optional pre-generated key file per scheme tag.
  std::map<std::string, std::string> key_paths;
};

struct CalibrationSettings {
  double fpr = 0.01;
  int n_null = 1000;
};

struct MockProviderSettings {
  double nonanchor_dropout = 0.0;
  double anchor_dropout = 0.0;
  bool nearest_fallback = false;
  std::string attribute_table;  // empty: bundled table
};

struct ProviderSettings {
  std::string kind = "mock";  // mock | remote
  MockProviderSettings mock;
  RemoteConfig remote;
};

struct BenchSettings {
  std::vector<Scheme> schemes{std::begin(kAllSchemes), std::end(kAllSchemes)};
  std::vector<AttackKind> attacks{AttackKind::none, AttackKind::csi, AttackKind::rpm};
  int n_images = 50;
};

struct RunConfig {
  std::uint64_t seed = 2026;
  std::string out_dir = "csilab-out";
  DiffusionSettings diffusion;
  EncoderSettings encoders;
  SchemeSettings schemes;
  CalibrationSettings calibration;
  ProviderSettings provider;
  AttackConfig attack;
  BenchSettings bench;

  /// Cross-field checks; also applied after parsing.
  void validate() const {
    if (!diffusion.shape.valid()) throw ConfigError("diffusion.shape must be positive");
    if (diffusion.steps < 1) throw ConfigError("diffusion.steps must be >= 1");
    if (diffusion.eta < 0.0) throw ConfigError("diffusion.eta must be >= 0");
    if (diffusion.cond_dim < 1 || encoders.image_dim < 1) throw ConfigError("embedding dims must be >= 1");
    if (!(calibration.fpr > 0.0 && calibration.fpr <= 0.5)) throw ConfigError("calibration.fpr must lie in (0, 0.5]");
    if (calibration.n_null < 100) throw ConfigError("calibration.n_null must be >= 100");
    if (provider.kind != "mock" && provider.kind != "remote") {
      throw ConfigError("provider.kind must be 'mock' or 'remote'");
    }
    if (provider.kind == "remote") provider.remote.validate();
    for (double p : {provider.mock.nonanchor_dropout, provider.mock.anchor_dropout}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("provider.mock dropout must lie in [0, 1]");
    }
    attack.validate();
    if (bench.n_images < 1) throw ConfigError("bench.n_images must be >= 1");
    if (bench.schemes.empty() || bench.attacks.empty()) throw ConfigError("bench needs schemes and attacks");
  }
};

namespace detail {

/// Reads known members of one JSON object and rejects everything else.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void read(const char* name, T& out) {
    known_.insert(name);
    if (!j_.contains(name)) return;
    try {
      out = j_.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path(name) + " has the wrong type");
    }
  }

  /// Returns the sub-object or nullptr when absent.
  const nlohmann::json* child(const char* name) {
    known_.insert(name);
    return j_.contains(name) ? &j_.at(name) : nullptr;
  }

  [[nodiscard]] std::string path(const std::string& name) const {
    return where_.empty() ? name : where_ + "." + name;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!known_.count(k)) throw ConfigError("unknown config field '" + path(k) + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> known_;
};

inline Shape shape_field(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + " must be [channels, height, width]");
  try {
    return Shape{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + " must hold integers");
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::StrictObject;
  RunConfig c;
  StrictObject root(j, "");
  root.read("seed", c.seed);
  root.read("out_dir", c.out_dir);

  if (const auto* d = root.child("diffusion")) {
    StrictObject o(*d, "diffusion");
    if (const auto* s = o.child("shape")) c.diffusion.shape = detail::shape_field(*s, "diffusion.shape");
    o.read("steps", c.diffusion.steps);
    o.read("beta_min", c.diffusion.beta_min);
    o.read("beta_max", c.diffusion.beta_max);
    o.read("eta", c.diffusion.eta);
    o.read("gamma", c.diffusion.gamma);
    o.read("cond_dim", c.diffusion.cond_dim);
    o.read("model_seed", c.diffusion.model_seed);
    o.finish();
  }
  if (const auto* e = root.child("encoders")) {
    StrictObject o(*e, "encoders");
    o.read("image_dim", c.encoders.image_dim);
    o.read("text_seed", c.encoders.text_seed);
    o.read("image_seed", c.encoders.image_seed);
    o.finish();
  }
  if (const auto* s = root.child("schemes")) {
    StrictObject o(*s, "schemes");
    auto key_path = [&](StrictObject& so, const char* tag) {
      std::string p;
      so.read("key", p);
      if (!p.empty()) c.schemes.key_paths[tag] = p;
    };
    if (const auto* t = o.child("trw")) {
      StrictObject so(*t, "schemes.trw");
      so.read("channel", c.schemes.trw.channel);
      so.read("inner_radius", c.schemes.trw.inner_radius);
      so.read("outer_radius", c.schemes.trw.outer_radius);
      so.read("magnitude", c.schemes.trw.magnitude);
      key_path(so, "trw");
      so.finish();
    }
    if (const auto* t = o.child("gsw")) {
      StrictObject so(*t, "schemes.gsw");
      so.read("bits", c.schemes.gsw.bits);
      key_path(so, "gsw");
      so.finish();
    }
    if (const auto* t = o.child("wind")) {
      StrictObject so(*t, "schemes.wind");
      so.read("bank_size", c.schemes.wind.bank_size);
      so.read("max_pairwise_cosine", c.schemes.wind.max_pairwise_cosine);
      so.read("max_resample", c.schemes.wind.max_resample);
      key_path(so, "wind");
      so.finish();
    }
    if (const auto* t = o.child("seal")) {
      StrictObject so(*t, "schemes.seal");
      so.read("grid_rows", c.schemes.seal.grid_rows);
      so.read("grid_cols", c.schemes.seal.grid_cols);
      so.read("corr_cutoff", c.schemes.seal.corr_cutoff);
      key_path(so, "seal");
      so.finish();
    }
    o.finish();
  }
  if (const auto* k = root.child("calibration")) {
    StrictObject o(*k, "calibration");
    o.read("fpr", c.calibration.fpr);
    o.read("n_null", c.calibration.n_null);
    o.finish();
  }
  if (const auto* p = root.child("provider")) {
    StrictObject o(*p, "provider");
    o.read("kind", c.provider.kind);
    if (const auto* m = o.child("mock")) {
      StrictObject mo(*m, "provider.mock");
      mo.read("nonanchor_dropout", c.provider.mock.nonanchor_dropout);
      mo.read("anchor_dropout", c.provider.mock.anchor_dropout);
      mo.read("nearest_fallback", c.provider.mock.nearest_fallback);
      mo.read("attribute_table", c.provider.mock.attribute_table);
      mo.finish();
    }
    if (const auto* r = o.child("remote")) {
      StrictObject ro(*r, "provider.remote");
      auto& rc = c.provider.remote;
      ro.read("base_url", rc.base_url);
      ro.read("model", rc.model);
      ro.read("caption_base_url", rc.caption_base_url);
      ro.read("caption_model", rc.caption_model);
      ro.read("api_key_env", rc.api_key_env);
      ro.read("cache_dir", rc.cache_dir);
      ro.read("max_in_flight", rc.max_in_flight);
      ro.read("timeout_seconds", rc.timeout_seconds);
      ro.read("temperature", rc.temperature);
      ro.read("offline", rc.offline);
      ro.finish();
    }
    o.finish();
  }
  if (const auto* a = root.child("attack")) {
    StrictObject o(*a, "attack");
    o.read("tau_text", c.attack.tau_text);
    o.read("tau_vis", c.attack.tau_vis);
    o.read("tau_csw", c.attack.tau_csw);
    o.read("lambda_anc", c.attack.lambda_anc);
    o.read("lambda_attr", c.attack.lambda_attr);
    o.read("m_candidates", c.attack.m_candidates);
    o.finish();
  }
  if (const auto* b = root.child("bench")) {
    StrictObject o(*b, "bench");
    std::vector<std::string> schemes, attacks;
    o.read("schemes", schemes);
    o.read("attacks", attacks);
    o.read("n_images", c.bench.n_images);
    o.finish();
    if (b->contains("schemes")) {
      c.bench.schemes.clear();
      for (const auto& s : schemes) c.bench.schemes.push_back(parse_scheme(s));
    }
    if (b->contains("attacks")) {
      c.bench.attacks.clear();
      for (const auto& s : attacks) c.bench.attacks.push_back(parse_attack(s));
    }
  }
  root.finish();

  const Shape shape = c.diffusion.shape;
  c.schemes.trw.shape = c.schemes.gsw.shape = c.schemes.wind.shape = c.schemes.seal.shape = shape;
  c.schemes.seal.embed_dim = c.diffusion.cond_dim;
  c.validate();
  return c;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  const auto& d = c.diffusion;
  const auto& s = c.schemes;
  auto with_key = [&](nlohmann::json j, const char* tag) {
    if (auto it = s.key_paths.find(tag); it != s.key_paths.end()) j["key"] = it->second;
    return j;
  };
  std::vector<std::string> schemes, attacks;
  for (auto x : c.bench.schemes) schemes.emplace_back(to_string(x));
  for (auto x : c.bench.attacks) attacks.emplace_back(to_string(x));
  const auto& r = c.provider.remote;
  return {
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"diffusion",
       {{"shape", {d.shape.channels, d.shape.height, d.shape.width}},
        {"steps", d.steps},
        {"beta_min", d.beta_min},
        {"beta_max", d.beta_max},
        {"eta", d.eta},
        {"gamma", d.gamma},
        {"cond_dim", d.cond_dim},
        {"model_seed", d.model_seed}}},
      {"encoders",
       {{"image_dim", c.encoders.image_dim},
        {"text_seed", c.encoders.text_seed},
        {"image_seed", c.encoders.image_seed}}},
      {"schemes",
       {{"trw", with_key({{"channel", s.trw.channel},
                          {"inner_radius", s.trw.inner_radius},
                          {"outer_radius", s.trw.outer_radius},
                          {"magnitude", s.trw.magnitude}},
                         "trw")},
        {"gsw", with_key({{"bits", s.gsw.bits}}, "gsw")},
        {"wind", with_key({{"bank_size", s.wind.bank_size},
                           {"max_pairwise_cosine", s.wind.max_pairwise_cosine},
                           {"max_resample", s.wind.max_resample}},
                          "wind")},
        {"seal", with_key({{"grid_rows", s.seal.grid_rows},
                           {"grid_cols", s.seal.grid_cols},
                           {"corr_cutoff", s.seal.corr_cutoff}},
                          "seal")}}},
      {"calibration", {{"fpr", c.calibration.fpr}, {"n_null", c.calibration.n_null}}},
      {"provider",
       {{"kind", c.provider.kind},
        {"mock",
         {{"nonanchor_dropout", c.provider.mock.nonanchor_dropout},
          {"anchor_dropout", c.provider.mock.anchor_dropout},
          {"nearest_fallback", c.provider.mock.nearest_fallback},
          {"attribute_table", c.provider.mock.attribute_table}}},
        {"remote",
         {{"base_url", r.base_url},
          {"model", r.model},
          {"caption_base_url", r.caption_base_url},
          {"caption_model", r.caption_model},
          {"api_key_env", r.api_key_env},
          {"cache_dir", r.cache_dir},
          {"max_in_flight", r.max_in_flight},
          {"timeout_seconds", r.timeout_seconds},
          {"temperature", r.temperature},
          {"offline", r.offline}}}}},
      {"attack",
       {{"tau_text", c.attack.tau_text},
        {"tau_vis", c.attack.tau_vis},
        {"tau_csw", c.attack.tau_csw},
        {"lambda_anc", c.attack.lambda_anc},
        {"lambda_attr", c.attack.lambda_attr},
        {"m_candidates", c.attack.m_candidates}}},
      {"bench", {{"schemes", schemes}, {"attacks", attacks}, {"n_images", c.bench.n_images}}}};
}

inline RunConfig default_run_config() { return run_config_from_json(nlohmann::json::object()); }

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace csilab
