// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "csilab/errors.hpp"
#include "csilab/unit_vector.hpp"

namespace csilab {

inline constexpr double kSymmetryTolerance = 1e-8;
inline constexpr double kNegativeEigenTolerance = 1e-8;
inline constexpr double kCovarianceJitter = 1e-6;

/// Symmetric PSD square root by eigendecomposition. Eigenvalues in
/// [-1e-8, 0) are treated as 0; anything more negative is rejected.
inline Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("matrix_sqrt_psd: matrix is not square");
  if (!m.allFinite()) throw NumericError("matrix_sqrt_psd: non-finite entry");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw NumericError("matrix_sqrt_psd: matrix is not symmetric");
  }
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw NumericError("matrix_sqrt_psd: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -kNegativeEigenTolerance) {
      throw NumericError("matrix_sqrt_psd: matrix is indefinite (eigenvalue " + std::to_string(ev[i]) + ")");
    }
    ev[i] = std::sqrt(std::max(0.0, ev[i]));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance of a set of equal-dimension vectors.
inline GaussianMoments fit_gaussian(const std::vector<UnitVector>& set) {
  if (set.size() < 2) throw ConfigError("frechet: each set needs at least 2 vectors");
  const auto d = static_cast<Eigen::Index>(set.front().dim());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(set.size()), d);
  for (std::size_t r = 0; r < set.size(); ++r) {
    if (static_cast<Eigen::Index>(set[r].dim()) != d) throw ShapeError("frechet: mixed vector dimensions");
    for (Eigen::Index c = 0; c < d; ++c) x(static_cast<Eigen::Index>(r), c) = set[r][static_cast<std::size_t>(c)];
  }
  GaussianMoments g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / static_cast<double>(set.size() - 1);
  return g;
}

/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2), each S regularized by 1e-6 I.
inline double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw ShapeError("frechet: dimension mismatch");
  }
  const auto d = a.mean.size();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd s1 = a.cov + kCovarianceJitter * eye;
  const Eigen::MatrixXd s2 = b.cov + kCovarianceJitter * eye;
  const Eigen::MatrixXd r1 = matrix_sqrt_psd(s1);
  Eigen::MatrixXd inner = r1 * s2 * r1;
  inner = 0.5 * (inner + inner.transpose());
  const double cross = matrix_sqrt_psd(inner).trace();
  const double fd = (a.mean - b.mean).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross;
  return std::max(0.0, fd);
}

inline double frechet_distance(const std::vector<UnitVector>& set_a, const std::vector<UnitVector>& set_b) {
  if (!set_a.empty() && !set_b.empty() && set_a.front().dim() != set_b.front().dim()) {
    throw ShapeError("frechet: dimension mismatch");
  }
  return frechet_distance(fit_gaussian(set_a), fit_gaussian(set_b));
}

}  // namespace csilab
