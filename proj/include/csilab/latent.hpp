// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "csilab/encoding.hpp"
#include "csilab/errors.hpp"
#include "csilab/random.hpp"

namespace csilab {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  [[nodiscard]] bool valid() const noexcept { return channels > 0 && height > 0 && width > 0; }
  [[nodiscard]] std::string str() const {
    return "[" + std::to_string(channels) + "," + std::to_string(height) + "," +
           std::to_string(width) + "]";
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape " + a.str() + " vs " + b.str());
}

/// Dense [C,H,W] tensor of 32-bit floats stored row-major.
///
/// Images, initial noises and per-step noises all live in this type. The
/// constructor rejects non-finite data; `data()` hands out a mutable span for
/// in-place construction, after which `check_finite()` restores the guarantee.
class LatentTensor {
 public:
  LatentTensor() = default;

  explicit LatentTensor(Shape shape) : shape_(shape), data_(checked_size(shape), 0.0f) {}

  LatentTensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
    check_finite();
  }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::span<float> data() noexcept { return data_; }
  [[nodiscard]] const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  [[nodiscard]] float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  [[nodiscard]] std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * shape_.height + static_cast<std::size_t>(y)) *
               shape_.width +
           static_cast<std::size_t>(x);
  }

  void check_finite() const {
    for (float v : data_) {
      if (!std::isfinite(v)) throw NumericError("tensor holds a non-finite value");
    }
  }

  [[nodiscard]] bool is_zero() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return v == 0.0f; });
  }

  friend bool operator==(const LatentTensor&, const LatentTensor&) = default;

 private:
  static std::size_t checked_size(const Shape& s) {
    if (!s.valid()) throw ShapeError("tensor shape must be positive, got " + s.str());
    return s.size();
  }

  Shape shape_{};
  std::vector<float> data_;
};

/// I.i.d. standard normal tensor from the mt19937_64 stream keyed by `seed`.
inline LatentTensor sample_latent(std::uint64_t seed, Shape shape) {
  LatentTensor t(shape);
  Rng rng(mix_seed({seed, 0x6c6174656e74ULL}));
  fill_normal(t.data(), rng);
  return t;
}

inline double dot(const LatentTensor& a, const LatentTensor& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

inline double l2_norm(const LatentTensor& a) { return std::sqrt(dot(a, a)); }

inline double cosine_similarity(const LatentTensor& a, const LatentTensor& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine of a zero tensor");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

/// Returns alpha*a + beta*b.
inline LatentTensor linear_combination(double alpha, const LatentTensor& a, double beta,
                                       const LatentTensor& b) {
  require_same_shape(a.shape(), b.shape(), "linear_combination");
  LatentTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = static_cast<float>(alpha * a[i] + beta * b[i]);
  }
  out.check_finite();
  return out;
}

// ---------------------------------------------------------------------------
// .lat files: one JSON header line, then base64 of little-endian f32 data.
// ---------------------------------------------------------------------------

inline constexpr int kLatFormatVersion = 1;

inline std::string to_lat_string(const LatentTensor& t) {
  nlohmann::json header = {{"format", "csilab-latent"},
                           {"version", kLatFormatVersion},
                           {"shape", {t.shape().channels, t.shape().height, t.shape().width}},
                           {"dtype", "f32le"}};
  return header.dump() + "\n" + pack_le<float>(t.data()) + "\n";
}

inline LatentTensor from_lat_string(std::string_view text) {
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos) throw FormatError(".lat: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(".lat: bad header: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != "csilab-latent") {
    throw FormatError(".lat: not a csilab latent file");
  }
  if (header.value("version", 0) != kLatFormatVersion) {
    throw FormatError(".lat: unsupported version");
  }
  if (header.value("dtype", "") != "f32le") throw FormatError(".lat: unsupported dtype");
  const auto dims = header.value("shape", nlohmann::json());
  if (!dims.is_array() || dims.size() != 3 ||
      !std::all_of(dims.begin(), dims.end(), [](const auto& d) { return d.is_number_integer(); })) {
    throw FormatError(".lat: shape must be 3 integers");
  }
  Shape shape{dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
  if (!shape.valid()) throw FormatError(".lat: non-positive shape " + shape.str());

  std::string_view body = text.substr(nl + 1);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
  std::vector<float> values = unpack_le<float>(body, shape.size());
  try {
    return LatentTensor(shape, std::move(values));
  } catch (const NumericError& e) {
    throw FormatError(std::string(".lat: ") + e.what());
  }
}

inline void write_lat(const std::filesystem::path& path, const LatentTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_lat_string(t);
  if (!out) throw IoError("write failed: " + path.string());
}

inline LatentTensor read_lat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_lat_string(ss.str());
}

}  // namespace csilab
