// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "csilab/csilab.hpp"

namespace csilab::testing {

inline const RunConfig& default_config() {
  static const RunConfig cfg = default_run_config();
  return cfg;
}

inline const World& default_world() {
  static const World world(default_config());
  return world;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("csilab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> random_cond(int dim, std::uint64_t seed) {
  const UnitVector u = random_unit_vector(static_cast<std::size_t>(dim), seed);
  return {u.values().begin(), u.values().end()};
}

/// Mock providers plus attack environment around one ledger.
struct Bench {
  GenerationLedger ledger;
  MockCaptioner captioner;
  MockProposer proposer;
  AttackEnvironment env;

  explicit Bench(MockCaptionerOptions opts = {}, std::uint64_t proposer_seed = 3)
      : captioner(ledger, std::move(opts)),
        proposer(AttributeTable::bundled(), proposer_seed),
        env{default_world().schedule, default_world().model, default_world().text, default_world().image,
            captioner, proposer, &ledger} {}
};

}  // namespace csilab::testing
