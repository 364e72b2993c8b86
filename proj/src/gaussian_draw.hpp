#pragma once

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace ctsmooth::detail {

// One draw from N(0, cov) for a symmetric PSD (possibly singular) cov.
// The square root is taken of the correlation matrix so that components
// on very different scales keep their relative accuracy; eigenvalues at
// round-off level are treated as exact zeros.
inline Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd& cov, std::mt19937_64& rng) {
  const Eigen::Index n = cov.rows();
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(n);
  for (Eigen::Index i = 0; i < n; ++i) xi(i) = normal(rng);
  if (n == 0) return xi;
  Eigen::VectorXd scale = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd inv = scale;
  for (Eigen::Index i = 0; i < n; ++i) inv(i) = scale(i) > 0.0 ? 1.0 / scale(i) : 0.0;
  const Eigen::MatrixXd R = inv.asDiagonal() * cov * inv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
  Eigen::VectorXd lambda = es.eigenvalues();
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = lambda(i) > tol ? std::sqrt(lambda(i)) : 0.0;
  return scale.asDiagonal() * (es.eigenvectors() * lambda.asDiagonal() * xi);
}

}  // namespace ctsmooth::detail
