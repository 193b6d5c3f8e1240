// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/config.hpp"
#include "csilab/corpus.hpp"
#include "csilab/csi.hpp"
#include "csilab/detection.hpp"
#include "csilab/errors.hpp"
#include "csilab/frechet.hpp"
#include "csilab/keys.hpp"
#include "csilab/ledger.hpp"
#include "csilab/providers.hpp"
#include "csilab/world.hpp"

namespace csilab {

struct TrialRecord {
  Scheme scheme = Scheme::trw;
  AttackKind attack = AttackKind::none;
  int image_id = 0;
  /// Absent when the attack produced no image (empty accepted set).
  std::optional<DetectionOutcome> detection;
  bool injection_success = false;
  std::uint64_t seed = 0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct DetectionSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double threshold = 0.0;
  /// Distance from the worst-case statistic to the threshold; positive when
  /// every record is on the detecting side.
  double margin = 0.0;

  friend bool operator==(const DetectionSummary&, const DetectionSummary&) = default;
};

struct SummaryRow {
  Scheme scheme = Scheme::trw;
  AttackKind attack = AttackKind::none;
  std::size_t n = 0;
  double asr = 0.0;
  std::optional<DetectionSummary> stats;
  double injection_rate = 0.0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct FrechetEntry {
  Scheme scheme = Scheme::trw;
  std::string set_a;
  std::string set_b;
  double distance = 0.0;

  friend bool operator==(const FrechetEntry&, const FrechetEntry&) = default;
};

struct EvaluationReport {
  nlohmann::json config = nlohmann::json::object();
  std::vector<SummaryRow> rows;
  std::vector<FrechetEntry> frechet;
  std::vector<TrialRecord> trials;

  [[nodiscard]] const SummaryRow* row(Scheme s, AttackKind a) const {
    for (const auto& r : rows) {
      if (r.scheme == s && r.attack == a) return &r;
    }
    return nullptr;
  }
  [[nodiscard]] std::optional<double> frechet_between(Scheme s, std::string_view a, std::string_view b) const {
    for (const auto& f : frechet) {
      if (f.scheme == s && ((f.set_a == a && f.set_b == b) || (f.set_a == b && f.set_b == a))) return f.distance;
    }
    return std::nullopt;
  }

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

// ---------------------------------------------------------------------------

/// Fraction of records whose detector still fires. Missing detections count as misses.
inline double asr(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw ConfigError("asr: no records");
  const auto hits = std::count_if(records.begin(), records.end(),
                                  [](const auto& r) { return r.detection && r.detection->detected; });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

inline DetectionSummary summarize_statistics(const std::vector<double>& stats, double threshold, Direction dir) {
  if (stats.empty()) throw ConfigError("detection_stats: no statistics");
  DetectionSummary s;
  double sum = 0.0;
  s.min = s.max = stats.front();
  for (double v : stats) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(stats.size());
  s.threshold = threshold;
  s.margin = dir == Direction::lower_detects ? threshold - s.max : s.min - threshold;
  return s;
}

/// Summary over the records that carry a detection. All must share one scheme.
inline DetectionSummary detection_stats(const std::vector<TrialRecord>& records) {
  std::vector<double> stats;
  std::optional<Scheme> scheme;
  double threshold = 0.0;
  for (const auto& r : records) {
    if (scheme && *scheme != r.scheme) throw ConfigError("detection_stats: records mix schemes");
    scheme = r.scheme;
    if (!r.detection) continue;
    stats.push_back(r.detection->statistic);
    threshold = r.detection->threshold;
  }
  if (!scheme || stats.empty()) throw ConfigError("detection_stats: no detections");
  return summarize_statistics(stats, threshold, detection_direction(*scheme));
}

// ---------------------------------------------------------------------------

/// Builds the providers for one benchmark scheme around its ledger.
using ProviderFactory = std::function<ProviderSet(const GenerationLedger&, const RunConfig&)>;

inline ProviderSet make_mock_providers(const GenerationLedger& ledger, const RunConfig& cfg) {
  std::set<std::string> vocab;
  for (const auto& e : bundled_prompt_corpus()) vocab.insert(e.anchors.tokens().begin(), e.anchors.tokens().end());
  auto opts = mock_captioner_options(cfg);
  opts.anchor_vocabulary = std::move(vocab);
  ProviderSet p;
  p.captioner = std::make_unique<MockCaptioner>(ledger, std::move(opts));
  p.proposer = std::make_unique<MockProposer>(attribute_table_for(cfg), mix_seed({cfg.seed, 0x70726f70ULL}));
  return p;
}

/// Generates n watermarked images per scheme, attacks each, and detects on the
/// top-ranked accepted CSI candidate, the RPM output, or the image itself.
inline EvaluationReport run_benchmark(const RunConfig& cfg, const ProviderFactory& factory = make_mock_providers,
                                      const std::vector<CorpusEntry>& corpus = bundled_prompt_corpus()) {
  cfg.validate();
  if (cfg.diffusion.eta != 0.0) throw ConfigError("benchmark: requires a deterministic schedule (eta = 0)");
  if (corpus.empty()) throw ConfigError("benchmark: empty prompt corpus");
  const World world(cfg);

  EvaluationReport report;
  report.config = run_config_to_json(cfg);
  for (Scheme scheme : cfg.bench.schemes) {
    const auto tag = static_cast<std::uint64_t>(scheme);
    WatermarkKey key;
    if (auto it = cfg.schemes.key_paths.find(std::string(to_string(scheme))); it != cfg.schemes.key_paths.end()) {
      key = load_key(it->second);
      if (scheme_of(key) != scheme) throw ConfigError("benchmark: key file " + it->second + " has the wrong scheme");
      if (std::isnan(key_threshold(key))) {
        calibrate_key(key, cfg.calibration.n_null, cfg.calibration.fpr, mix_seed({cfg.seed, 0x63616cULL, tag}));
      }
    } else {
      key = make_calibrated_key(scheme, cfg, mix_seed({cfg.seed, 0x6b6579ULL, tag}));
    }
    if (key_shape(key) != world.shape()) throw ConfigError("benchmark: key shape does not match the model");

    GenerationLedger ledger;
    ProviderSet providers = factory(ledger, cfg);
    const AttackEnvironment env{world.schedule, world.model,        world.text, world.image,
                                *providers.captioner, *providers.proposer, &ledger};

    std::map<AttackKind, std::vector<TrialRecord>> by_attack;
    std::vector<UnitVector> originals, csi_set, rpm_set;
    for (int i = 0; i < cfg.bench.n_images; ++i) {
      const CorpusEntry& e = corpus[static_cast<std::size_t>(i) % corpus.size()];
      const std::uint64_t seed = mix_seed({cfg.seed, 0x696d67ULL, tag, static_cast<std::uint64_t>(i)});
      const LatentTensor x0 = generate_watermarked(key, world, e.prompt, seed, i).x0;
      ledger.add(x0, e.prompt, seed);
      originals.push_back(world.image.embed_image(x0));
      const std::string target = tokenize(e.intent.target_attribute).front();

      for (AttackKind attack : cfg.bench.attacks) {
        TrialRecord rec{scheme, attack, i, std::nullopt, false, seed};
        std::optional<LatentTensor> attacked;
        if (attack == AttackKind::none) {
          attacked = x0;
        } else if (attack == AttackKind::csi) {
          try {
            const Prompt t0 = providers.captioner->caption(x0);
            const AttackResult res = run_csi(x0, t0, e.anchors, e.intent, cfg.attack, env);
            if (const auto* best = res.best()) attacked = *best->image;
          } catch (const ConfigError&) {
            // caption lost the anchors: the attack cannot start
          }
          if (attacked) csi_set.push_back(world.image.embed_image(*attacked));
        } else {
          const AttackResult res = run_rpm(x0, env, mix_seed({seed, 0x72706dULL}));
          attacked = *res.candidates.front().image;
          rpm_set.push_back(world.image.embed_image(*attacked));
        }
        if (attacked) {
          const ImageDetection d = detect_image(key, world, *providers.captioner, *attacked);
          rec.detection = d.outcome;
          rec.injection_success = d.caption.contains(target);
        }
        by_attack[attack].push_back(rec);
      }
    }

    for (AttackKind attack : cfg.bench.attacks) {
      const auto& recs = by_attack[attack];
      SummaryRow row;
      row.scheme = scheme;
      row.attack = attack;
      row.n = recs.size();
      row.asr = asr(recs);
      const auto injected = std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.injection_success; });
      row.injection_rate = static_cast<double>(injected) / static_cast<double>(recs.size());
      if (std::any_of(recs.begin(), recs.end(), [](const auto& r) { return r.detection.has_value(); })) {
        row.stats = detection_stats(recs);
      }
      report.rows.push_back(row);
      report.trials.insert(report.trials.end(), recs.begin(), recs.end());
    }

    const std::vector<std::pair<std::string, const std::vector<UnitVector>*>> sets = {
        {"original", &originals}, {"csi", &csi_set}, {"rpm", &rpm_set}};
    for (std::size_t a = 0; a < sets.size(); ++a) {
      for (std::size_t b = a + 1; b < sets.size(); ++b) {
        if (sets[a].second->size() < 2 || sets[b].second->size() < 2) continue;
        report.frechet.push_back(
            {scheme, sets[a].first, sets[b].first, frechet_distance(*sets[a].second, *sets[b].second)});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

inline nlohmann::json detection_to_json(const DetectionOutcome& d) {
  nlohmann::json j = {{"scheme", to_string(d.scheme)},
                      {"statistic", d.statistic},
                      {"threshold", d.threshold},
                      {"detected", d.detected},
                      {"margin", d.margin}};
  if (d.matched_index) j["matched_index"] = *d.matched_index;
  return j;
}

inline DetectionOutcome detection_from_json(const nlohmann::json& j) {
  DetectionOutcome d;
  d.scheme = parse_scheme(j.at("scheme").get<std::string>());
  d.statistic = j.at("statistic").get<double>();
  d.threshold = j.at("threshold").get<double>();
  d.detected = j.at("detected").get<bool>();
  d.margin = j.at("margin").get<double>();
  if (j.contains("matched_index")) d.matched_index = j.at("matched_index").get<int>();
  return d;
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j = {{"scheme", to_string(row.scheme)},
                        {"attack", to_string(row.attack)},
                        {"n", row.n},
                        {"asr", row.asr},
                        {"injection_rate", row.injection_rate}};
    if (row.stats) {
      j["stat_mean"] = row.stats->mean;
      j["stat_min"] = row.stats->min;
      j["stat_max"] = row.stats->max;
      j["threshold"] = row.stats->threshold;
      j["margin"] = row.stats->margin;
    }
    rows.push_back(std::move(j));
  }
  nlohmann::json fd = nlohmann::json::array();
  for (const auto& f : r.frechet) {
    fd.push_back({{"scheme", to_string(f.scheme)}, {"a", f.set_a}, {"b", f.set_b}, {"distance", f.distance}});
  }
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json j = {{"scheme", to_string(t.scheme)},
                        {"attack", to_string(t.attack)},
                        {"image", t.image_id},
                        {"injection_success", t.injection_success},
                        {"seed", t.seed}};
    j["detection"] = t.detection ? detection_to_json(*t.detection) : nlohmann::json(nullptr);
    trials.push_back(std::move(j));
  }
  return {{"format", "csilab-report"},
          {"version", 1},
          {"config", r.config},
          {"rows", rows},
          {"frechet", fd},
          {"trials", trials}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    if (j.value("format", "") != "csilab-report") throw FormatError("not a csilab report");
    r.config = j.at("config");
    for (const auto& row : j.at("rows")) {
      SummaryRow s;
      s.scheme = parse_scheme(row.at("scheme").get<std::string>());
      s.attack = parse_attack(row.at("attack").get<std::string>());
      s.n = row.at("n").get<std::size_t>();
      s.asr = row.at("asr").get<double>();
      s.injection_rate = row.at("injection_rate").get<double>();
      if (row.contains("stat_mean")) {
        s.stats = DetectionSummary{row.at("stat_mean").get<double>(), row.at("stat_min").get<double>(),
                                   row.at("stat_max").get<double>(), row.at("threshold").get<double>(),
                                   row.at("margin").get<double>()};
      }
      r.rows.push_back(s);
    }
    for (const auto& f : j.at("frechet")) {
      r.frechet.push_back({parse_scheme(f.at("scheme").get<std::string>()), f.at("a").get<std::string>(),
                           f.at("b").get<std::string>(), f.at("distance").get<double>()});
    }
    for (const auto& t : j.at("trials")) {
      TrialRecord rec;
      rec.scheme = parse_scheme(t.at("scheme").get<std::string>());
      rec.attack = parse_attack(t.at("attack").get<std::string>());
      rec.image_id = t.at("image").get<int>();
      rec.injection_success = t.at("injection_success").get<bool>();
      rec.seed = t.at("seed").get<std::uint64_t>();
      if (!t.at("detection").is_null()) rec.detection = detection_from_json(t.at("detection"));
      r.trials.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Flat table, one row per (scheme, attack). Statistic columns are blank
/// when a row has no detections.
inline std::string report_to_csv(const EvaluationReport& r) {
  std::string out = "scheme,attack,n,asr,stat_mean,stat_min,stat_max,threshold,margin,injection_rate\n";
  for (const auto& row : r.rows) {
    out += std::string(to_string(row.scheme)) + "," + std::string(to_string(row.attack)) + "," +
           std::to_string(row.n) + "," + format_number(row.asr) + ",";
    if (row.stats) {
      for (double v : {row.stats->mean, row.stats->min, row.stats->max, row.stats->threshold, row.stats->margin}) {
        out += format_number(v) + ",";
      }
    } else {
      out += ",,,,,";
    }
    out += format_number(row.injection_rate) + "\n";
  }
  return out;
}

inline std::filesystem::path csv_path_for(const std::filesystem::path& json_path) {
  auto p = json_path;
  return p.replace_extension(".csv");
}

/// Writes the full report to `json_path` and the table next to it as .csv.
inline void write_report(const EvaluationReport& r, const std::filesystem::path& json_path) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
  };
  write(json_path, report_to_json(r).dump(2) + "\n");
  write(csv_path_for(json_path), report_to_csv(r));
}

inline EvaluationReport read_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + json_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return report_from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("report " + json_path.string() + ": " + e.what());
  }
}

}  // namespace csilab
