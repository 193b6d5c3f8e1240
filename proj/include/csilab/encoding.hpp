// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "csilab/errors.hpp"

namespace csilab {

inline std::string base64_encode(std::span<const unsigned char> bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) throw FormatError("base64: length is not a multiple of 4");
  std::vector<unsigned char> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw FormatError("base64: invalid character");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// Packs arithmetic values as little-endian bytes and base64-encodes them.
template <typename T>
  requires std::is_arithmetic_v<T>
std::string pack_le(std::span<const T> values) {
  std::vector<unsigned char> bytes(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char* dst = bytes.data() + i * sizeof(T);
    std::memcpy(dst, &values[i], sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(dst, dst + sizeof(T));
  }
  return base64_encode(bytes);
}

template <typename T>
  requires std::is_arithmetic_v<T>
std::vector<T> unpack_le(std::string_view text, std::size_t expected_count) {
  const auto bytes = base64_decode(text);
  if (bytes.size() != expected_count * sizeof(T)) {
    throw FormatError("payload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected_count * sizeof(T)));
  }
  std::vector<T> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    unsigned char tmp[sizeof(T)];
    std::memcpy(tmp, bytes.data() + i * sizeof(T), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(tmp, tmp + sizeof(T));
    std::memcpy(&values[i], tmp, sizeof(T));
  }
  return values;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace csilab
