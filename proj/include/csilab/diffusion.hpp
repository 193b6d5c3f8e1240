// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csilab/errors.hpp"
#include "csilab/latent.hpp"
#include "csilab/random.hpp"

namespace csilab {

/// Linear beta ramp with cumulative alpha products. Step t (1-based) reads
/// betas[t-1] and alphas_bar[t-1].
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas_bar;
  double eta = 0.0;

  [[nodiscard]] double alpha_bar(int t) const { return alphas_bar[static_cast<std::size_t>(t - 1)]; }
  [[nodiscard]] double alpha_bar_prev(int t) const { return t > 1 ? alpha_bar(t - 1) : 1.0; }
};

inline NoiseSchedule make_schedule(int steps, double beta_min, double beta_max, double eta) {
  if (steps < 1) throw ConfigError("schedule: step count must be >= 1");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw ConfigError("schedule: need 0 < beta_min <= beta_max < 1");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("schedule: eta must lie in [0, 1]");

  NoiseSchedule s;
  s.steps = steps;
  s.eta = eta;
  s.betas.resize(static_cast<std::size_t>(steps));
  s.alphas_bar.resize(static_cast<std::size_t>(steps));
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double beta =
        steps == 1 ? beta_min : beta_min + (beta_max - beta_min) * i / static_cast<double>(steps - 1);
    s.betas[static_cast<std::size_t>(i)] = beta;
    prod *= 1.0 - beta;
    s.alphas_bar[static_cast<std::size_t>(i)] = prod;
  }
  return s;
}

struct DenoiserConfig {
  Shape shape{4, 32, 32};
  int cond_dim = 64;
  double gamma = 0.1;
  std::uint64_t seed = 1234;
};

/// Affine noise predictor eps(z, t, c) = gamma * z + P c.
///
/// P is a fixed [C*H*W, cond_dim] matrix with N(0, 1/cond_dim) entries drawn
/// from `seed`. Affinity is what makes DDIM inversion exact in this world.
class DenoiserModel {
 public:
  explicit DenoiserModel(DenoiserConfig cfg = {}) : cfg_(cfg) {
    if (!cfg_.shape.valid()) throw ConfigError("denoiser: invalid latent shape");
    if (cfg_.cond_dim < 1) throw ConfigError("denoiser: cond_dim must be >= 1");
    if (!std::isfinite(cfg_.gamma)) throw ConfigError("denoiser: gamma must be finite");
    cond_matrix_.resize(cfg_.shape.size() * static_cast<std::size_t>(cfg_.cond_dim));
    Rng rng(mix_seed({cfg_.seed, 0x636f6e64ULL}));
    fill_normal(std::span<double>(cond_matrix_), rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.cond_dim));
    for (double& v : cond_matrix_) v *= scale;
  }

  [[nodiscard]] const DenoiserConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const Shape& shape() const noexcept { return cfg_.shape; }
  [[nodiscard]] int cond_dim() const noexcept { return cfg_.cond_dim; }
  [[nodiscard]] double gamma() const noexcept { return cfg_.gamma; }

  /// Row-major [C*H*W, cond_dim].
  [[nodiscard]] std::span<const double> cond_matrix() const noexcept { return cond_matrix_; }

  [[nodiscard]] std::vector<double> cond_projection(std::span<const double> cond) const {
    if (cond.size() != static_cast<std::size_t>(cfg_.cond_dim)) {
      throw ShapeError("denoiser: conditioning has dim " + std::to_string(cond.size()) +
                       ", expected " + std::to_string(cfg_.cond_dim));
    }
    const std::size_t n = cfg_.shape.size();
    const std::size_t d = static_cast<std::size_t>(cfg_.cond_dim);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = cond_matrix_.data() + i * d;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += row[j] * cond[j];
      out[i] = s;
    }
    return out;
  }

  /// Noise prediction for one entry given its precomputed P c term.
  [[nodiscard]] double predict(double z, double cond_term) const noexcept {
    return cfg_.gamma * z + cond_term;
  }

 private:
  DenoiserConfig cfg_;
  std::vector<double> cond_matrix_;
};

/// Per-step noises {eps_t}, t = 1..T, stored at index t-1.
struct StepNoises {
  std::vector<LatentTensor> noises;

  static StepNoises zeros(int steps, Shape shape) {
    return StepNoises{std::vector<LatentTensor>(static_cast<std::size_t>(steps), LatentTensor(shape))};
  }
  [[nodiscard]] int steps() const noexcept { return static_cast<int>(noises.size()); }
  [[nodiscard]] bool all_zero() const noexcept {
    for (const auto& n : noises) {
      if (!n.is_zero()) return false;
    }
    return true;
  }
  friend bool operator==(const StepNoises&, const StepNoises&) = default;
};

/// z_{t-1} = z_scale * z_t + cond_scale * (P c) + noise_scale * eps_t.
struct DdimStepCoefficients {
  double z_scale = 0.0;
  double cond_scale = 0.0;
  double noise_scale = 0.0;
};

inline double ddim_sigma(const NoiseSchedule& s, int t) {
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar_prev(t);
  return s.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
}

/// Collapses each DDIM step into affine coefficients. Throws NumericError when
/// a step's coefficient on z_t vanishes, since that step could not be inverted.
inline std::vector<DdimStepCoefficients> ddim_coefficients(const NoiseSchedule& s,
                                                           const DenoiserModel& model) {
  std::vector<DdimStepCoefficients> out(static_cast<std::size_t>(s.steps));
  const double g = model.gamma();
  for (int t = 1; t <= s.steps; ++t) {
    const double ab = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar_prev(t);
    const double sigma = ddim_sigma(s, t);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    const double x0_scale = std::sqrt(ab_prev) / std::sqrt(ab);
    DdimStepCoefficients c;
    c.z_scale = x0_scale * (1.0 - std::sqrt(1.0 - ab) * g) + dir * g;
    c.cond_scale = -x0_scale * std::sqrt(1.0 - ab) + dir;
    c.noise_scale = sigma;
    if (!(std::abs(c.z_scale) > 1e-12) || !std::isfinite(c.z_scale)) {
      throw NumericError("ddim: step " + std::to_string(t) + " is not invertible");
    }
    out[static_cast<std::size_t>(t - 1)] = c;
  }
  return out;
}

struct GenerationOutput {
  LatentTensor x0;
  StepNoises used_noises;
};

namespace detail {

inline void check_finite(std::span<const double> v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(where) + ": non-finite intermediate");
  }
}

inline LatentTensor to_tensor(Shape shape, std::span<const double> v) {
  std::vector<float> data(v.begin(), v.end());
  return LatentTensor(shape, std::move(data));
}

}  // namespace detail

/// Runs DDIM from t = T down to 1 with eps = gamma * z_t + P c.
///
/// With eta > 0 the per-step noises are taken verbatim from `step_noises` when
/// given (noise copying) or drawn from `noise_seed` otherwise; the noises used
/// are returned either way. Arithmetic runs in double; the result is rounded to f32.
inline GenerationOutput ddim_generate(const LatentTensor& z_T, std::span<const double> cond,
                                      const NoiseSchedule& schedule, const DenoiserModel& model,
                                      const StepNoises* step_noises = nullptr,
                                      std::uint64_t noise_seed = 0) {
  require_same_shape(z_T.shape(), model.shape(), "ddim_generate");
  if (schedule.steps < 1) throw ConfigError("ddim_generate: empty schedule");
  if (step_noises != nullptr) {
    if (step_noises->steps() != schedule.steps) {
      throw ShapeError("ddim_generate: step noise count does not match schedule");
    }
    for (const auto& n : step_noises->noises) require_same_shape(n.shape(), z_T.shape(), "step noise");
  }

  StepNoises used;
  if (step_noises != nullptr) {
    used = *step_noises;
  } else if (schedule.eta > 0.0) {
    used.noises.reserve(static_cast<std::size_t>(schedule.steps));
    for (int t = 1; t <= schedule.steps; ++t) {
      used.noises.push_back(sample_latent(mix_seed({noise_seed, 0x73746570ULL,
                                                    static_cast<std::uint64_t>(t)}),
                                          z_T.shape()));
    }
  } else {
    used = StepNoises::zeros(schedule.steps, z_T.shape());
  }

  const std::vector<double> cond_term = model.cond_projection(cond);
  std::vector<double> z(z_T.data().begin(), z_T.data().end());
  for (int t = schedule.steps; t >= 1; --t) {
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar_prev(t);
    const double sigma = ddim_sigma(schedule, t);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    const auto& noise = used.noises[static_cast<std::size_t>(t - 1)];
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double eps = model.predict(z[i], cond_term[i]);
      const double x0_pred = (z[i] - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
      z[i] = std::sqrt(ab_prev) * x0_pred + dir * eps + sigma * noise[i];
    }
    detail::check_finite(z, "ddim_generate");
  }
  return {detail::to_tensor(z_T.shape(), z), std::move(used)};
}

/// Exact inverse of ddim_generate: solves each affine step for z_t.
///
/// Deterministic schedules (eta = 0) need no noises. Stochastic schedules need
/// the exact noises used at generation time, otherwise ConfigError.
inline LatentTensor ddim_invert(const LatentTensor& x0, std::span<const double> cond,
                                const NoiseSchedule& schedule, const DenoiserModel& model,
                                const StepNoises* step_noises = nullptr) {
  require_same_shape(x0.shape(), model.shape(), "ddim_invert");
  if (schedule.eta > 0.0 && step_noises == nullptr) {
    throw ConfigError("ddim_invert: eta > 0 requires the generation-time step noises");
  }
  if (step_noises != nullptr && step_noises->steps() != schedule.steps) {
    throw ShapeError("ddim_invert: step noise count does not match schedule");
  }
  const auto coeffs = ddim_coefficients(schedule, model);
  const std::vector<double> cond_term = model.cond_projection(cond);
  std::vector<double> z(x0.data().begin(), x0.data().end());
  for (int t = 1; t <= schedule.steps; ++t) {
    const auto& c = coeffs[static_cast<std::size_t>(t - 1)];
    const LatentTensor* noise =
        step_noises != nullptr ? &step_noises->noises[static_cast<std::size_t>(t - 1)] : nullptr;
    if (noise != nullptr) require_same_shape(noise->shape(), x0.shape(), "step noise");
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double n = noise != nullptr ? (*noise)[i] : 0.0;
      z[i] = (z[i] - c.cond_scale * cond_term[i] - c.noise_scale * n) / c.z_scale;
    }
    detail::check_finite(z, "ddim_invert");
  }
  return detail::to_tensor(x0.shape(), z);
}

}  // namespace csilab
