// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/detection.hpp"
#include "csilab/encoding.hpp"
#include "csilab/errors.hpp"
#include "csilab/gaussian_shading.hpp"
#include "csilab/seal.hpp"
#include "csilab/tree_ring.hpp"
#include "csilab/wind.hpp"

namespace csilab {

using WatermarkKey = std::variant<TrwKey, GswKey, WindKey, SealKey>;

inline Scheme scheme_of(const WatermarkKey& key) {
  return std::visit(
      [](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TrwKey>) return Scheme::trw;
        else if constexpr (std::is_same_v<K, GswKey>) return Scheme::gsw;
        else if constexpr (std::is_same_v<K, WindKey>) return Scheme::wind;
        else return Scheme::seal;
      },
      key);
}

inline const Shape& key_shape(const WatermarkKey& key) {
  return std::visit([](const auto& k) -> const Shape& { return k.shape; }, key);
}

inline double key_threshold(const WatermarkKey& key) {
  return std::visit(
      [](const auto& k) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, SealKey>) return k.match_threshold;
        else return k.threshold;
      },
      key);
}

inline void set_key_threshold(WatermarkKey& key, double threshold,
                              std::optional<CalibrationInfo> info) {
  std::visit(
      [&](auto& k) {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, SealKey>) k.match_threshold = threshold;
        else k.threshold = threshold;
        k.calibration = info;
      },
      key);
}

inline const std::optional<CalibrationInfo>& key_calibration(const WatermarkKey& key) {
  return std::visit([](const auto& k) -> const std::optional<CalibrationInfo>& { return k.calibration; },
                    key);
}

/// What a scheme needs to watermark one initial latent.
struct EmbedRequest {
  std::uint64_t seed = 0;                  // fresh randomness (TRW, GSW)
  int bank_index = 0;                      // WIND
  std::optional<UnitVector> semantic;      // SEAL: embedding of the generating prompt
};

inline LatentTensor embed_watermark(const WatermarkKey& key, const EmbedRequest& req) {
  return std::visit(
      [&](const auto& k) -> LatentTensor {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TrwKey>) {
          return trw_embed(k, req.seed);
        } else if constexpr (std::is_same_v<K, GswKey>) {
          return gsw_embed(k, req.seed);
        } else if constexpr (std::is_same_v<K, WindKey>) {
          return wind_embed(k, req.bank_index);
        } else {
          if (!req.semantic) throw ConfigError("seal: embedding requires a semantic embedding");
          return seal_embed(*req.semantic, k);
        }
      },
      key);
}

/// Runs the scheme's detector on an inverted latent. SEAL also needs the
/// semantic embedding of the presented image.
inline DetectionOutcome detect_watermark(const WatermarkKey& key, const LatentTensor& z_hat,
                                         const std::optional<UnitVector>& image_semantic) {
  return std::visit(
      [&](const auto& k) -> DetectionOutcome {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TrwKey>) {
          return trw_detect(k, z_hat);
        } else if constexpr (std::is_same_v<K, GswKey>) {
          return gsw_detect(k, z_hat);
        } else if constexpr (std::is_same_v<K, WindKey>) {
          return wind_detect(k, z_hat);
        } else {
          if (!image_semantic) throw ConfigError("seal: detection requires an image embedding");
          return seal_detect(k, z_hat, *image_semantic);
        }
      },
      key);
}

/// The scheme's raw detection statistic, independent of the stored threshold.
inline double watermark_statistic(const WatermarkKey& key, const LatentTensor& z_hat,
                                  const std::optional<UnitVector>& image_semantic) {
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TrwKey>) {
          return trw_distance(k, z_hat);
        } else if constexpr (std::is_same_v<K, GswKey>) {
          return gsw_bit_accuracy(k, z_hat);
        } else if constexpr (std::is_same_v<K, WindKey>) {
          return wind_best_match(k, z_hat).cosine;
        } else {
          if (!image_semantic) throw ConfigError("seal: detection requires an image embedding");
          return static_cast<double>(seal_match_count(k, z_hat, *image_semantic));
        }
      },
      key);
}

// ---------------------------------------------------------------------------
// Serialization: JSON with base64 little-endian payloads.
// ---------------------------------------------------------------------------

inline constexpr int kKeyFormatVersion = 1;

namespace detail {

inline nlohmann::json shape_json(const Shape& s) { return {s.channels, s.height, s.width}; }

inline Shape shape_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("key: shape must have 3 dims");
  Shape s{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  if (!s.valid()) throw FormatError("key: invalid shape");
  return s;
}

// JSON has no NaN; an uncalibrated threshold is stored as null.
inline nlohmann::json threshold_json(double t) {
  return std::isnan(t) ? nlohmann::json(nullptr) : nlohmann::json(t);
}

inline double threshold_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline nlohmann::json calibration_json(const std::optional<CalibrationInfo>& c) {
  if (!c) return nullptr;
  return {{"fpr_target", c->fpr_target}, {"n_null", c->n_null}, {"seed", c->seed}};
}

inline std::optional<CalibrationInfo> calibration_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return CalibrationInfo{j.at("fpr_target").get<double>(), j.at("n_null").get<int>(),
                         j.at("seed").get<std::uint64_t>()};
}

}  // namespace detail

inline nlohmann::json key_to_json(const WatermarkKey& key) {
  nlohmann::json j;
  j["format"] = "csilab-key";
  j["version"] = kKeyFormatVersion;
  j["scheme"] = std::string(to_string(scheme_of(key)));
  j["shape"] = detail::shape_json(key_shape(key));
  j["threshold"] = detail::threshold_json(key_threshold(key));
  j["calibration"] = detail::calibration_json(key_calibration(key));
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TrwKey>) {
          j["channel"] = k.channel;
          j["inner_radius"] = k.inner_radius;
          j["outer_radius"] = k.outer_radius;
          j["magnitude"] = k.magnitude;
          j["mask"] = pack_le<std::int32_t>(std::vector<std::int32_t>(k.mask.begin(), k.mask.end()));
          std::vector<double> flat;
          flat.reserve(2 * k.pattern.size());
          for (const auto& c : k.pattern) {
            flat.push_back(c.real());
            flat.push_back(c.imag());
          }
          j["mask_size"] = k.mask.size();
          j["pattern"] = pack_le<double>(flat);
        } else if constexpr (std::is_same_v<K, GswKey>) {
          j["bits"] = k.bits.size();
          j["bit_values"] = pack_le<std::uint8_t>(k.bits);
          j["block_order"] = pack_le<std::uint32_t>(k.block_order);
          j["sign_mask"] = pack_le<std::uint8_t>(k.sign_mask);
        } else if constexpr (std::is_same_v<K, WindKey>) {
          nlohmann::json bank = nlohmann::json::array();
          for (const auto& t : k.bank) bank.push_back(pack_le<float>(t.data()));
          j["bank"] = bank;
        } else {
          j["prf_seed"] = k.prf_seed;
          j["grid"] = {k.grid_rows, k.grid_cols};
          j["corr_cutoff"] = k.corr_cutoff;
          j["embed_dim"] = k.embed_dim();
          std::vector<double> flat;
          for (const auto& h : k.hyperplanes) flat.insert(flat.end(), h.values().begin(), h.values().end());
          j["hyperplanes"] = pack_le<double>(flat);
        }
      },
      key);
  return j;
}

inline WatermarkKey key_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "csilab-key") throw FormatError("not a csilab key");
    if (j.value("version", 0) != kKeyFormatVersion) throw FormatError("unsupported key version");
    const Scheme scheme = parse_scheme(j.at("scheme").get<std::string>());
    const Shape shape = detail::shape_from(j.at("shape"));
    const double threshold = detail::threshold_from(j.at("threshold"));
    const auto calibration = detail::calibration_from(j.at("calibration"));
    switch (scheme) {
      case Scheme::trw: {
        TrwKey k;
        k.shape = shape;
        k.channel = j.at("channel").get<int>();
        k.inner_radius = j.at("inner_radius").get<double>();
        k.outer_radius = j.at("outer_radius").get<double>();
        k.magnitude = j.at("magnitude").get<double>();
        const auto n = j.at("mask_size").get<std::size_t>();
        const auto mask = unpack_le<std::int32_t>(j.at("mask").get<std::string>(), n);
        k.mask.assign(mask.begin(), mask.end());
        const auto flat = unpack_le<double>(j.at("pattern").get<std::string>(), 2 * n);
        for (std::size_t i = 0; i < n; ++i) k.pattern.emplace_back(flat[2 * i], flat[2 * i + 1]);
        for (int idx : k.mask) {
          if (idx < 0 || idx >= shape.height * shape.width) throw FormatError("trw: mask index out of range");
        }
        if (k.channel < 0 || k.channel >= shape.channels) throw FormatError("trw: channel out of range");
        k.threshold = threshold;
        k.calibration = calibration;
        return k;
      }
      case Scheme::gsw: {
        GswKey k;
        k.shape = shape;
        const auto bits = j.at("bits").get<std::size_t>();
        k.bits = unpack_le<std::uint8_t>(j.at("bit_values").get<std::string>(), bits);
        k.block_order = unpack_le<std::uint32_t>(j.at("block_order").get<std::string>(), shape.size());
        k.sign_mask = unpack_le<std::uint8_t>(j.at("sign_mask").get<std::string>(), shape.size());
        k.threshold = threshold;
        k.calibration = calibration;
        validate(k);
        return k;
      }
      case Scheme::wind: {
        WindKey k;
        k.shape = shape;
        for (const auto& entry : j.at("bank")) {
          k.bank.emplace_back(shape, unpack_le<float>(entry.get<std::string>(), shape.size()));
        }
        if (k.bank.empty()) throw FormatError("wind: empty bank");
        k.threshold = threshold;
        k.calibration = calibration;
        return k;
      }
      case Scheme::seal: {
        SealKey k;
        k.shape = shape;
        k.prf_seed = j.at("prf_seed").get<std::uint64_t>();
        k.grid_rows = j.at("grid").at(0).get<int>();
        k.grid_cols = j.at("grid").at(1).get<int>();
        k.corr_cutoff = j.at("corr_cutoff").get<double>();
        const auto dim = j.at("embed_dim").get<std::size_t>();
        const auto planes = static_cast<std::size_t>(k.grid_rows * k.grid_cols);
        const auto flat = unpack_le<double>(j.at("hyperplanes").get<std::string>(), planes * dim);
        for (std::size_t p = 0; p < planes; ++p) {
          k.hyperplanes.push_back(UnitVector::from_unit(
              std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(p * dim),
                                  flat.begin() + static_cast<std::ptrdiff_t>((p + 1) * dim))));
        }
        k.match_threshold = threshold;
        k.calibration = calibration;
        validate(k);
        return k;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("key: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("key: ") + e.what());
  }
  throw FormatError("key: unreachable scheme");
}

inline std::string key_to_string(const WatermarkKey& key) { return key_to_json(key).dump(2) + "\n"; }

inline void save_key(const std::filesystem::path& path, const WatermarkKey& key) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << key_to_string(key);
  if (!out) throw IoError("write failed: " + path.string());
}

inline WatermarkKey load_key(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open key file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("key: " + std::string(e.what()));
  }
  return key_from_json(j);
}

}  // namespace csilab
