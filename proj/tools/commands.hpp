// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

// Subcommand implementations behind the csilab executable. Each returns a
// process exit code; run_command maps library errors onto the same codes.

#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "csilab/config.hpp"
#include "csilab/corpus.hpp"
#include "csilab/csi.hpp"
#include "csilab/eval.hpp"
#include "csilab/keys.hpp"
#include "csilab/ledger.hpp"
#include "csilab/providers.hpp"
#include "csilab/remote.hpp"
#include "csilab/world.hpp"

namespace csilab::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2, kNotDetected = 3 };

inline constexpr const char* kLedgerFile = "ledger.json";

/// Flags shared by every subcommand.
struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string provider;  // empty: whatever the config says
};

inline RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? default_run_config() : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.provider.empty()) {
    if (o.provider != "mock" && o.provider != "remote") throw ConfigError("--provider must be mock or remote");
    cfg.provider.kind = o.provider;
  }
  cfg.validate();
  return cfg;
}

inline void load_ledger_if_present(GenerationLedger& ledger, const fs::path& dir) {
  const fs::path file = (dir.empty() ? fs::path(".") : dir) / kLedgerFile;
  if (fs::exists(file)) ledger.load(file);
}

inline fs::path dir_of(const fs::path& file) {
  const fs::path d = file.parent_path();
  return d.empty() ? fs::path(".") : d;
}

inline ProviderSet make_providers(const RunConfig& cfg, const GenerationLedger& ledger,
                                  const AnchorSet* anchors = nullptr) {
  if (cfg.provider.kind == "remote") return make_remote_providers(cfg.provider.remote);
  ProviderSet p;
  p.captioner = std::make_unique<MockCaptioner>(ledger, mock_captioner_options(cfg, anchors));
  p.proposer = std::make_unique<MockProposer>(attribute_table_for(cfg), mix_seed({cfg.seed, 0x70726f70ULL}));
  return p;
}

inline void print_outcome(std::ostream& out, const DetectionOutcome& d) {
  out << "scheme     " << to_string(d.scheme) << "\n"
      << "statistic  " << d.statistic << "\n"
      << "threshold  " << d.threshold << "\n"
      << "margin     " << d.margin << "\n";
  if (d.matched_index) out << "bank_index " << *d.matched_index << "\n";
  out << "decision   " << (d.detected ? "watermarked" : "not watermarked") << "\n";
}

// ---------------------------------------------------------------------------

struct KeygenOptions {
  CommonOptions common;
  std::string scheme;
  std::string out;
};

inline int cmd_keygen(const KeygenOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.common);
  const Scheme scheme = parse_scheme(o.scheme);
  if (o.out.empty()) throw ConfigError("keygen: --out is required");
  const WatermarkKey key = make_calibrated_key(scheme, cfg, mix_seed({cfg.seed, 0x6b6579ULL}));
  save_key(o.out, key);
  const auto& cal = *key_calibration(key);
  out << "scheme     " << to_string(scheme) << "\n"
      << "threshold  " << std::setprecision(10) << key_threshold(key) << "\n"
      << "fpr_target " << cal.fpr_target << "\n"
      << "n_null     " << cal.n_null << "\n"
      << "key        " << o.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  CommonOptions common;
  std::string key;
  std::string prompt;
  std::string out;
  int bank_index = 0;
};

inline int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.common);
  const WatermarkKey key = load_key(o.key);
  const World world(cfg);
  if (key_shape(key) != world.shape()) throw ConfigError("generate: key shape does not match the model");
  const Prompt prompt = Prompt::parse(o.prompt);
  if (prompt.empty()) throw ConfigError("generate: --prompt must contain at least one word");
  if (o.out.empty()) throw ConfigError("generate: --out is required");

  const std::uint64_t seed = cfg.seed;
  const LatentTensor x = generate_watermarked(key, world, prompt, seed, o.bank_index).x0;
  const fs::path lat = o.out;
  if (!dir_of(lat).empty()) fs::create_directories(dir_of(lat));
  write_lat(lat, x);

  GenerationLedger ledger;
  load_ledger_if_present(ledger, dir_of(lat));
  ledger.add(x, prompt, seed, lat.string());
  ledger.save(dir_of(lat) / kLedgerFile);
  out << "image  " << lat.string() << "\n"
      << "prompt " << prompt.text() << "\n"
      << "seed   " << seed << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct DetectOptions {
  CommonOptions common;
  std::string key;
  std::string image;
};

/// Detection for an image nobody can caption: invert unconditionally. SEAL
/// has no semantic reference then and reports zero matches.
inline DetectionOutcome detect_uncaptioned(const WatermarkKey& key, const World& world, const LatentTensor& x) {
  const std::vector<double> zero(static_cast<std::size_t>(world.model.cond_dim()), 0.0);
  const LatentTensor z_hat = ddim_invert(x, zero, world.schedule, world.model);
  if (scheme_of(key) == Scheme::seal) return decide(Scheme::seal, 0.0, key_threshold(key));
  return detect_watermark(key, z_hat, std::nullopt);
}

inline int cmd_detect(const DetectOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.common);
  const WatermarkKey key = load_key(o.key);
  const LatentTensor x = read_lat(o.image);
  const World world(cfg);
  if (x.shape() != world.shape() || key_shape(key) != world.shape()) {
    throw ConfigError("detect: image or key shape does not match the model");
  }
  GenerationLedger ledger;
  load_ledger_if_present(ledger, dir_of(o.image));
  ProviderSet providers = make_providers(cfg, ledger);

  DetectionOutcome d;
  try {
    const ImageDetection det = detect_image(key, world, *providers.captioner, x);
    out << "caption    " << det.caption.text() << "\n";
    d = det.outcome;
  } catch (const LookupError&) {
    out << "caption    (none: image not in ledger, inverting unconditionally)\n";
    d = detect_uncaptioned(key, world, x);
  }
  print_outcome(out, d);
  return d.detected ? kOk : kNotDetected;
}

// ---------------------------------------------------------------------------

struct AttackOptions {
  CommonOptions common;
  std::string image;
  std::string key;  // optional: detect on the top candidate
  std::string anchors;
  std::string target;
  std::string replace;
  std::string intent;
  std::string attack = "csi";
  std::string out;
};

inline int cmd_attack(const AttackOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.common);
  const AttackKind kind = parse_attack(o.attack);
  if (kind == AttackKind::none) throw ConfigError("attack: --attack must be csi or rpm");
  if (o.out.empty()) throw ConfigError("attack: --out is required");
  const World world(cfg);
  const LatentTensor x0 = read_lat(o.image);
  if (x0.shape() != world.shape()) throw ConfigError("attack: image shape does not match the model");
  std::optional<WatermarkKey> key;
  if (!o.key.empty()) key = load_key(o.key);

  std::optional<AnchorSet> anchors;
  AttackIntent intent;
  if (kind == AttackKind::csi) {
    anchors = AnchorSet::parse(o.anchors);
    intent.target_attribute = o.target;
    if (!o.replace.empty()) intent.replaced_attribute = o.replace;
    intent.description = o.intent;
    validate_intent(intent, *anchors);
  }

  GenerationLedger ledger;
  load_ledger_if_present(ledger, dir_of(o.image));
  const fs::path out_dir = o.out;
  fs::create_directories(out_dir);
  if (!fs::equivalent(out_dir, dir_of(o.image))) load_ledger_if_present(ledger, out_dir);
  ProviderSet providers = make_providers(cfg, ledger, anchors ? &*anchors : nullptr);
  const AttackEnvironment env{world.schedule, world.model, world.text, world.image,
                              *providers.captioner, *providers.proposer, &ledger};

  AttackResult res;
  if (kind == AttackKind::csi) {
    const Prompt t0 = providers.captioner->caption(x0);
    if (!anchors->all_in(t0)) {
      throw ConfigError("attack: anchors are not all present in the caption '" + t0.text() + "'");
    }
    res = run_csi(x0, t0, *anchors, intent, cfg.attack, env);
  } else {
    res = run_rpm(x0, env, mix_seed({cfg.seed, 0x72706dULL}));
  }

  std::map<std::size_t, std::string> paths;
  for (std::size_t rank = 0; rank < res.accepted.size(); ++rank) {
    const std::size_t i = res.accepted[rank];
    const fs::path p = out_dir / ("candidate_" + std::to_string(rank) + ".lat");
    write_lat(p, *res.candidates[i].image);
    ledger.add(*res.candidates[i].image, res.candidates[i].prompt, cfg.seed, p.string());
    paths[i] = p.string();
  }
  ledger.save(out_dir / kLedgerFile);

  nlohmann::json report = attack_result_to_json(res, paths);
  report["source_image"] = o.image;
  if (key && res.best() != nullptr) {
    const ImageDetection d = detect_image(*key, world, *providers.captioner, *res.best()->image);
    report["top_detection"] = detection_to_json(d.outcome);
  }
  const fs::path report_path = out_dir / "attack_report.json";
  {
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + report_path.string());
    f << report.dump(2) << "\n";
  }

  out << "caption     " << res.t0.text() << "\n"
      << "proposed    " << res.counts.proposed << "\n"
      << "text_passed " << res.counts.text_passed << "\n"
      << "regenerated " << res.counts.regenerated << "\n"
      << "accepted    " << res.counts.accepted << "\n";
  for (std::size_t rank = 0; rank < std::min<std::size_t>(res.accepted.size(), 5); ++rank) {
    const auto& c = res.candidates[res.accepted[rank]];
    out << "  #" << rank << " rank=" << std::fixed << std::setprecision(4) << c.rank_score
        << " s_text=" << c.s_text;
    if (c.s_vis) out << " s_vis=" << *c.s_vis;
    if (c.delta_csw) out << " delta_csw=" << *c.delta_csw;
    out << "  " << c.prompt.text() << "\n";
    out.unsetf(std::ios::floatfield);
  }
  if (res.accepted.empty()) out << "no candidate survived filtering\n";
  out << "report      " << report_path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchOptions {
  CommonOptions common;
  std::string out;
  std::optional<int> n_images;
  std::string schemes;  // comma list, empty: config
  std::string attacks;
};

inline int cmd_bench(const BenchOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o.common);
  if (o.n_images) cfg.bench.n_images = *o.n_images;
  if (!o.schemes.empty()) {
    cfg.bench.schemes.clear();
    for (const auto& t : tokenize(o.schemes)) cfg.bench.schemes.push_back(parse_scheme(t));
  }
  if (!o.attacks.empty()) {
    cfg.bench.attacks.clear();
    for (const auto& t : tokenize(o.attacks)) cfg.bench.attacks.push_back(parse_attack(t));
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();

  ProviderFactory factory = make_mock_providers;
  if (cfg.provider.kind == "remote") {
    factory = [](const GenerationLedger&, const RunConfig& c) { return make_remote_providers(c.provider.remote); };
  }
  const EvaluationReport report = run_benchmark(cfg, factory);
  fs::create_directories(cfg.out_dir);
  const fs::path json_path = fs::path(cfg.out_dir) / "report.json";
  write_report(report, json_path);

  out << report_to_csv(report);
  for (const auto& f : report.frechet) {
    out << "frechet " << to_string(f.scheme) << " " << f.set_a << "-" << f.set_b << " "
        << format_number(f.distance) << "\n";
  }
  out << "report " << json_path.string() << "\n"
      << "table  " << csv_path_for(json_path).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

/// Runs a command body, mapping library errors to exit codes.
inline int run_command(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace csilab::cli
