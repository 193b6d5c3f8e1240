// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace csilab::cli;

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Run configuration (JSON)");
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--provider", o.provider, "Caption/proposal provider")
      ->check(CLI::IsMember({"mock", "remote"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csilab: semantic watermark and semantic-injection attack lab"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  KeygenOptions keygen;
  auto* k = app.add_subcommand("keygen", "Generate a key and calibrate its threshold");
  add_common(k, keygen.common);
  k->add_option("--scheme", keygen.scheme, "Watermark scheme")
      ->required()
      ->check(CLI::IsMember({"trw", "gsw", "wind", "seal"}));
  k->add_option("--out", keygen.out, "Key file to write")->required();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Generate a watermarked latent image");
  add_common(g, gen.common);
  g->add_option("--key", gen.key, "Key file")->required();
  g->add_option("--prompt", gen.prompt, "Generating prompt")->required();
  g->add_option("--out", gen.out, "Output .lat file")->required();
  g->add_option("--index", gen.bank_index, "WIND bank entry to embed")->check(CLI::NonNegativeNumber);

  DetectOptions det;
  auto* d = app.add_subcommand("detect", "Detect the watermark in a latent image (exit 0 detected, 3 not)");
  add_common(d, det.common);
  d->add_option("--key", det.key, "Key file")->required();
  d->add_option("--image", det.image, "Image .lat file")->required();

  AttackOptions att;
  auto* a = app.add_subcommand("attack", "Run CSI or the RPM baseline on one image");
  add_common(a, att.common);
  a->add_option("--image", att.image, "Watermarked .lat file")->required();
  a->add_option("--key", att.key, "Key file; detects on the top candidate when given");
  a->add_option("--anchors", att.anchors, "Subject tokens to preserve, comma separated");
  a->add_option("--target", att.target, "Attribute to inject");
  a->add_option("--replace", att.replace, "Attribute the target replaces");
  a->add_option("--intent", att.intent, "Free-text edit description for the proposer");
  a->add_option("--attack", att.attack, "Attack kind")->check(CLI::IsMember({"csi", "rpm"}));
  a->add_option("--out", att.out, "Output directory")->required();

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "Benchmark attacks against schemes");
  add_common(b, bench.common);
  b->add_option("--out", bench.out, "Output directory (overrides the config)");
  b->add_option("--n", bench.n_images, "Images per scheme");
  b->add_option("--scheme", bench.schemes, "Schemes, comma separated");
  b->add_option("--attack", bench.attacks, "Attacks, comma separated (none, csi, rpm)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  auto& out = std::cout;
  if (*k) return run_command([&] { return cmd_keygen(keygen, out); }, std::cerr);
  if (*g) return run_command([&] { return cmd_generate(gen, out); }, std::cerr);
  if (*d) return run_command([&] { return cmd_detect(det, out); }, std::cerr);
  if (*a) {
    if (att.attack == "csi" && (att.anchors.empty() || att.target.empty())) {
      std::cerr << "error: csi needs --anchors and --target\n";
      return kConfigError;
    }
    return run_command([&] { return cmd_attack(att, out); }, std::cerr);
  }
  return run_command([&] { return cmd_bench(bench, out); }, std::cerr);
}
