// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace csilab {

// Every stochastic draw in the library uses mt19937_64 seeded through
// mix_seed, so a (master seed, role, index) triple names one stream.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void fill_normal(std::span<T> out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : out) v = static_cast<T>(normal(rng));
}

}  // namespace csilab
