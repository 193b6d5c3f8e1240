// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace csilab {

using Spectrum = std::vector<std::complex<double>>;

namespace detail {

template <bool Inverse>
void fft2_inplace(Spectrum& grid, int height, int width) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in, out;
  const auto h = static_cast<std::size_t>(height);
  const auto w = static_cast<std::size_t>(width);

  in.resize(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) in[x] = grid[y * w + x];
    if constexpr (Inverse) fft.inv(out, in); else fft.fwd(out, in);
    for (std::size_t x = 0; x < w; ++x) grid[y * w + x] = out[x];
  }
  in.resize(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) in[y] = grid[y * w + x];
    if constexpr (Inverse) fft.inv(out, in); else fft.fwd(out, in);
    for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = out[y];
  }
}

}  // namespace detail

/// Unnormalized forward 2-D DFT of a row-major real plane.
template <typename T>
Spectrum fft2(const std::vector<T>& plane, int height, int width) {
  Spectrum grid(plane.begin(), plane.end());
  detail::fft2_inplace<false>(grid, height, width);
  return grid;
}

/// Inverse 2-D DFT, scaled by 1/(H*W).
inline Spectrum ifft2(Spectrum grid, int height, int width) {
  detail::fft2_inplace<true>(grid, height, width);
  return grid;
}

}  // namespace csilab
