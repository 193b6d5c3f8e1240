// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "../tools/commands.hpp"
#include "fake_service.hpp"
#include "support.hpp"

namespace {

using namespace csilab;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) { return format_number(v); }

const std::vector<std::string> kWords = {"fox", "red", "forest", "castle", "river", "old", "cat", "boat",
                                         "snowy", "night", "glass", "tower", "dog", "lake", "blue", "bird"};

Prompt random_prompt(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::vector<std::string> t;
  for (int i = 0; i < 5; ++i) t.push_back(kWords[pick(rng)]);
  return Prompt::from_tokens(t);
}

Verdict inversion_exactness() {
  const auto& w = testing::default_world();
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto z = sample_latent(mix_seed({1, i}), w.shape());
    const Prompt p = random_prompt(mix_seed({2, i}));
    worst = std::max(worst, max_abs_diff(w.invert(w.generate(z, p).x0, p), z));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 5.0, "max_err=" + fmt(worst) + " seconds=" + fmt(secs)};
}

// Ideal statistic of a scheme on its own watermarked latent.
bool ideal(Scheme s, double stat, int patches) {
  switch (s) {
    case Scheme::trw: return stat < 1e-4;
    case Scheme::gsw: return stat == 1.0;
    case Scheme::wind: return stat > 0.999;
    case Scheme::seal: return stat == patches;
  }
  return false;
}

Verdict detector_soundness() {
  const auto t0 = Clock::now();
  const RunConfig& cfg = testing::default_config();
  const World& w = testing::default_world();
  bool ok = true;
  std::ostringstream detail;
  for (Scheme s : kAllSchemes) {
    const WatermarkKey key = make_calibrated_key(s, cfg, mix_seed({7, static_cast<std::uint64_t>(s)}));
    GenerationLedger ledger;
    MockCaptioner cap(ledger);
    const int patches = s == Scheme::seal ? std::get<SealKey>(key).patch_count() : 0;
    int detected = 0, ideal_count = 0, false_pos = 0;
    for (int i = 0; i < 200; ++i) {
      const Prompt p = random_prompt(mix_seed({3, static_cast<std::uint64_t>(i)}));
      const std::uint64_t seed = mix_seed({4, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i)});
      const auto x = generate_watermarked(key, w, p, seed, i).x0;
      ledger.add(x, p);
      const auto d = detect_image(key, w, cap, x).outcome;
      detected += d.detected;
      ideal_count += ideal(s, d.statistic, patches);

      const auto clean = w.generate(sample_latent(mix_seed({5, seed}), w.shape()), p).x0;
      ledger.add(clean, p);
      false_pos += detect_image(key, w, cap, clean).outcome.detected;
    }
    const double fpr = false_pos / 200.0;
    ok = ok && detected == 200 && ideal_count == 200 && fpr <= 0.03;
    detail << to_string(s) << ":tpr=" << fmt(detected / 200.0) << ",ideal=" << ideal_count << ",fpr=" << fmt(fpr)
           << " ";
  }
  const double secs = seconds_since(t0);
  detail << "seconds=" << fmt(secs);
  return {ok && secs < 60.0, detail.str()};
}

Verdict gsw_null() {
  const GswKey key = gsw_keygen(GswConfig{}, 99);
  const Shape shape = key.shape;
  double sum = 0.0, sq = 0.0;
  int detected = 0;
  WatermarkKey wk = key;
  calibrate_key(wk, 1000, 0.01, 5);
  for (int i = 0; i < 500; ++i) {
    const auto z = sample_latent(mix_seed({6, static_cast<std::uint64_t>(i)}), shape);
    const double a = gsw_bit_accuracy(key, z);
    sum += a;
    sq += a * a;
    detected += detect_watermark(wk, z, std::nullopt).detected;
  }
  const double mean = sum / 500.0;
  const double sd = std::sqrt(sq / 500.0 - mean * mean);
  // Binomial oracle: accuracy of 64 fair bits has mean 0.5 and sd 1/16.
  const double oracle_sd = std::sqrt(0.25 / static_cast<double>(key.bits.size()));
  const bool ok = std::abs(mean - 0.5) <= 0.05 && std::abs(sd - oracle_sd) < 0.01 && detected <= 15;
  return {ok, "mean=" + fmt(mean) + " sd=" + fmt(sd) + " oracle_sd=" + fmt(oracle_sd) +
                  " detected=" + std::to_string(detected)};
}

const EvaluationReport& default_report() {
  static const EvaluationReport r = run_benchmark(default_run_config());
  return r;
}

Verdict csi_vs_content_independent() {
  const auto& r = default_report();
  bool ok = true;
  std::ostringstream detail;
  for (Scheme s : {Scheme::trw, Scheme::gsw, Scheme::wind}) {
    const auto* row = r.row(s, AttackKind::csi);
    if (row == nullptr) return {false, "missing row"};
    ok = ok && row->n == 50 && row->asr == 1.0 && row->injection_rate >= 0.8;
    detail << to_string(s) << ":asr=" << fmt(row->asr) << ",inject=" << fmt(row->injection_rate) << " ";
  }
  return {ok, detail.str()};
}

Verdict csi_vs_seal_gap() {
  const auto& r = default_report();
  const auto* csi = r.row(Scheme::seal, AttackKind::csi);
  const auto* rpm = r.row(Scheme::seal, AttackKind::rpm);
  if (csi == nullptr || rpm == nullptr) return {false, "missing row"};
  const double gap = csi->asr - rpm->asr;
  return {gap >= 0.3, "asr_csi=" + fmt(csi->asr) + " asr_rpm=" + fmt(rpm->asr) + " gap=" + fmt(gap)};
}

Verdict noise_copy_advantage() {
  const auto& w = testing::default_world();
  testing::Bench b;
  int wins = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Prompt p = random_prompt(mix_seed({8, i}));
    const Prompt edited = random_prompt(mix_seed({9, i}));
    const auto x = w.generate(sample_latent(mix_seed({10, i}), w.shape()), p).x0;
    const auto noise = extract_noise(x, w.text.embed(p), w.schedule, w.model);
    const auto copied = regenerate(noise, edited, b.env);
    const auto fresh = w.generate(sample_latent(mix_seed({11, i}), w.shape()), edited).x0;
    wins += csw_score(copied, noise, w.image) > csw_score(fresh, noise, w.image);
  }
  return {wins >= 90, "copied_wins=" + std::to_string(wins) + "/100"};
}

Verdict chf_cascade() {
  const auto& corpus = bundled_prompt_corpus();
  int runs = 0, violations = 0;
  for (int sweep = 0; sweep < 20; ++sweep) {
    const auto& e = corpus[static_cast<std::size_t>(sweep) % corpus.size()];
    MockCaptionerOptions o;
    o.nonanchor_dropout = 0.25;
    o.anchor_vocabulary = e.anchors.tokens();
    o.seed = static_cast<std::uint64_t>(sweep);
    testing::Bench b(o, static_cast<std::uint64_t>(sweep));
    const auto& w = testing::default_world();
    const auto x = w.generate(sample_latent(mix_seed({12, static_cast<std::uint64_t>(sweep)}), w.shape()), e.prompt).x0;
    b.ledger.add(x, e.prompt);
    const Prompt t0 = b.captioner.caption(x);
    if (!e.anchors.all_in(t0)) continue;

    std::optional<std::set<std::string>> previous;
    for (int step = 0; step <= 4; ++step) {
      AttackConfig cfg;
      cfg.m_candidates = 24;
      cfg.tau_text = 0.5 + 0.1 * step;
      cfg.tau_vis = 0.5 + 0.1 * step;
      cfg.tau_csw = 0.6 - 0.12 * step;
      const auto r = run_csi(x, t0, e.anchors, e.intent, cfg, b.env);
      ++runs;
      const auto& n = r.counts;
      if (!(n.proposed >= n.text_passed && n.text_passed >= n.regenerated && n.regenerated >= n.accepted)) {
        ++violations;
      }
      std::set<std::string> acc;
      for (std::size_t i : r.accepted) acc.insert(r.candidates[i].prompt.text());
      if (previous && !std::includes(previous->begin(), previous->end(), acc.begin(), acc.end())) ++violations;
      previous = std::move(acc);
    }
  }
  return {runs >= 80 && violations == 0, "runs=" + std::to_string(runs) + " violations=" + std::to_string(violations)};
}

Verdict frechet_correctness() {
  std::vector<UnitVector> x;
  for (std::uint64_t i = 0; i < 80; ++i) x.push_back(random_unit_vector(8, 100 + i));
  const double self = frechet_distance(x, x);

  GaussianMoments a, b;
  a.mean = Eigen::VectorXd::Zero(1);
  b.mean = Eigen::VectorXd::Ones(1);
  a.cov = b.cov = Eigen::MatrixXd::Identity(1, 1);
  const double one_d = frechet_distance(a, b);

  const int d = 12;
  a.mean = Eigen::VectorXd::Constant(d, 0.3);
  b.mean = Eigen::VectorXd::Constant(d, -0.2);
  a.cov = 2.0 * Eigen::MatrixXd::Identity(d, d);
  b.cov = 0.5 * Eigen::MatrixXd::Identity(d, d);
  const double iso = frechet_distance(a, b);
  const double iso_oracle = (a.mean - b.mean).squaredNorm() + d * std::pow(std::sqrt(2.0) - std::sqrt(0.5), 2);

  Rng rng(3);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(10, 7);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  const Eigen::MatrixXd g = m.transpose() * m;
  const Eigen::MatrixXd r = matrix_sqrt_psd(g);
  const double recon = (r * r - g).cwiseAbs().maxCoeff();

  const bool ok = self < 1e-8 && std::abs(one_d - 1.0) <= 1e-6 && std::abs(iso - iso_oracle) <= 1e-4 && recon <= 1e-6;
  return {ok, "self=" + fmt(self) + " one_d=" + fmt(one_d) + " iso_err=" + fmt(std::abs(iso - iso_oracle)) +
                  " sqrt_err=" + fmt(recon)};
}

Verdict frechet_ordering() {
  const auto& r = default_report();
  bool ok = true;
  std::ostringstream detail;
  for (Scheme s : kAllSchemes) {
    const auto csi = r.frechet_between(s, "original", "csi");
    const auto rpm = r.frechet_between(s, "original", "rpm");
    if (!csi || !rpm) return {false, "missing distances"};
    ok = ok && *csi < *rpm;
    detail << to_string(s) << ":csi=" << fmt(*csi) << ",rpm=" << fmt(*rpm) << " ";
  }
  return {ok, detail.str()};
}

Verdict simhash_law() {
  const std::size_t dim = 64;
  const UnitVector u = random_unit_vector(dim, 1);
  const UnitVector r = random_unit_vector(dim, 2);
  std::vector<double> o(dim);
  const double proj = cosine(u, r);
  for (std::size_t i = 0; i < dim; ++i) o[i] = r.values()[i] - proj * u.values()[i];
  const UnitVector ou = UnitVector::normalize(o);
  std::vector<double> v(dim);
  const double c = 0.95;
  for (std::size_t i = 0; i < dim; ++i) v[i] = c * u.values()[i] + std::sqrt(1.0 - c * c) * ou.values()[i];
  const UnitVector uv = UnitVector::normalize(v);

  int flips = 0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const std::vector<UnitVector> plane{random_unit_vector(dim, 5000 + i)};
    flips += hamming_distance(simhash(u, plane), simhash(uv, plane));
  }
  const double empirical = flips / 2000.0;
  const double law = std::acos(cosine(u, uv)) / std::numbers::pi;
  return {std::abs(empirical - law) <= 0.03, "empirical=" + fmt(empirical) + " law=" + fmt(law)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict reproducibility() {
  const auto root = testing::scratch_dir("acceptance_repro");
  std::string csv[2];
  for (int run = 0; run < 2; ++run) {
    cli::BenchOptions o;
    o.common.seed = 4242;
    o.out = (root / ("run" + std::to_string(run))).string();
    std::ostringstream sink;
    if (cli::cmd_bench(o, sink) != cli::kOk) return {false, "bench failed"};
    csv[run] = slurp(root / ("run" + std::to_string(run)) / "report.csv");
  }
  const bool bench_same = !csv[0].empty() && csv[0] == csv[1];

  RemoteConfig cfg;
  std::string live_body, live_caption;
  std::vector<Prompt> live_props;
  const AnchorSet anchors{"fox"};
  AttackIntent intent;
  intent.target_attribute = "blue";
  const auto lat = sample_latent(1, Shape{4, 32, 32});
  {
    testing::FakeService svc;
    cfg.base_url = svc.base_url();
    cfg.cache_dir = (root / "cache").string();
    cfg.api_key_env = "CSILAB_TEST_UNSET_KEY";
    ProviderSet p = make_remote_providers(cfg);
    live_props = p.proposer->propose(Prompt::parse("a red fox running"), anchors, intent, 3);
    live_caption = p.captioner->caption(lat).raw;
  }
  cfg.offline = true;
  ProviderSet replay = make_remote_providers(cfg);
  bool replay_same = false;
  try {
    replay_same = replay.proposer->propose(Prompt::parse("a red fox running"), anchors, intent, 3) == live_props &&
                  replay.captioner->caption(lat).raw == live_caption;
  } catch (const Error&) {
    replay_same = false;
  }
  return {bench_same && replay_same, std::string("bench_csv_identical=") + (bench_same ? "yes" : "no") +
                                         " remote_replay_identical=" + (replay_same ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"inversion-exactness", inversion_exactness},
      {"detector-soundness", detector_soundness},
      {"gsw-null", gsw_null},
      {"csi-vs-content-independent", csi_vs_content_independent},
      {"csi-vs-seal-gap", csi_vs_seal_gap},
      {"noise-copy-advantage", noise_copy_advantage},
      {"chf-cascade", chf_cascade},
      {"frechet-correctness", frechet_correctness},
      {"frechet-ordering", frechet_ordering},
      {"simhash-collision-law", simhash_law},
      {"reproducibility", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
