// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

// One image through the whole lab: watermark it under Gaussian Shading and
// SEAL, run the semantic-injection attack, and check what each detector says.

#include <iomanip>
#include <iostream>

#include "csilab/csilab.hpp"

int main() {
  using namespace csilab;
  const RunConfig cfg = default_run_config();
  const World world(cfg);
  const CorpusEntry& recipe = bundled_prompt_corpus().front();
  std::cout << "prompt:  " << recipe.prompt.text() << "\n"
            << "anchors: " << *recipe.anchors.tokens().begin() << "\n"
            << "inject:  " << recipe.intent.target_attribute << "\n\n";

  for (Scheme scheme : {Scheme::gsw, Scheme::seal}) {
    const WatermarkKey key = make_calibrated_key(scheme, cfg, 7);
    GenerationLedger ledger;
    MockCaptioner captioner(ledger);
    MockProposer proposer(AttributeTable::bundled(), 11);
    const AttackEnvironment env{world.schedule, world.model, world.text, world.image, captioner, proposer, &ledger};

    const LatentTensor x0 = generate_watermarked(key, world, recipe.prompt, 42).x0;
    ledger.add(x0, recipe.prompt, 42);
    const auto before = detect_image(key, world, captioner, x0).outcome;

    const AttackResult res = run_csi(x0, captioner.caption(x0), recipe.anchors, recipe.intent, cfg.attack, env);
    std::cout << to_string(scheme) << ": original statistic " << before.statistic << " (threshold "
              << before.threshold << ")\n"
              << "  candidates " << res.counts.proposed << " -> text " << res.counts.text_passed
              << " -> regenerated " << res.counts.regenerated << " -> accepted " << res.counts.accepted << "\n";
    if (const auto* best = res.best()) {
      const auto after = detect_image(key, world, captioner, *best->image).outcome;
      std::cout << "  top edit: " << best->prompt.text() << "\n"
                << "  attacked statistic " << after.statistic << ", still detected: " << std::boolalpha
                << after.detected << "\n";
    }
    const AttackResult rpm = run_rpm(x0, env, 99);
    const auto base = detect_image(key, world, captioner, *rpm.candidates.front().image).outcome;
    std::cout << "  fresh-noise regeneration statistic " << base.statistic << ", detected: " << base.detected
              << "\n\n";
  }
}
