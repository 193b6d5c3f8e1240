// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "csilab/errors.hpp"

namespace csilab {

struct RemoteConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string caption_base_url;  // empty: same as base_url
  std::string caption_model = "blip-base";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string cache_dir = ".csilab-cache";
  int max_in_flight = 4;
  int timeout_seconds = 60;
  double temperature = 0.0;
  bool offline = false;  // serve from cache only

  void validate() const {
    if (base_url.empty()) throw ConfigError("remote: base_url must not be empty");
    if (max_in_flight < 1) throw ConfigError("remote: max_in_flight must be >= 1");
    if (timeout_seconds < 1) throw ConfigError("remote: timeout_seconds must be >= 1");
    if (cache_dir.empty()) throw ConfigError("remote: a cache directory is required");
  }
};

}  // namespace csilab
