#pragma once

// Dense kernels for exact discretization of continuous-time LTI systems:
// matrix exponentials, eigendecomposition, and the noise Gramian integrals
//
//   forward:  int_0^t e^{A tau} B B^T e^{A^T tau} dtau
//   backward: int_0^t e^{-A tau} B B^T e^{-A^T tau} dtau
//
// evaluated in closed form through an eigendecomposition of A when A is
// diagonalizable and by Van Loan's augmented exponential otherwise.
//
// All functions are templated on the real scalar type. Inputs and outputs
// are real; complex arithmetic stays internal to the closed-form path.

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctsmooth/errors.hpp"

namespace ctsmooth {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using CMatX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using CVecX = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Eigendecomposition {
  CMatX<Scalar> Q;
  CVecX<Scalar> lambdas;
  CMatX<Scalar> Qinv;
  // 2-norm condition number of the balanced eigenvector matrix.
  Scalar condition = Scalar(1);
};

enum class GramianMethod { closed_form, van_loan, quadrature };

inline const char* to_string(GramianMethod m) {
  switch (m) {
    case GramianMethod::closed_form: return "closed_form";
    case GramianMethod::van_loan: return "van_loan";
    case GramianMethod::quadrature: return "quadrature";
  }
  return "unknown";
}

template <typename Scalar>
struct GramianResult {
  MatX<Scalar> value;
  GramianMethod method = GramianMethod::closed_form;
};

namespace linalg {

// Eigenvector matrices with a larger condition number are rejected.
inline constexpr double kMaxEigenvectorCondition = 1e8;
// Q diag(lambda) Q^{-1} must reproduce A to this relative Frobenius error.
inline constexpr double kMaxReconstructionError = 1e-10;
// Largest tolerated imaginary residue of a closed-form Gramian, relative.
inline constexpr double kMaxImaginaryResidue = 1e-9;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + ": non-finite entries");
  }
}

template <typename Scalar>
void require_square(const MatX<Scalar>& A, const char* what) {
  if (A.rows() != A.cols()) {
    throw InvalidInput(std::string(what) + ": matrix must be square");
  }
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  Plain out = m;
  out = (out + out.transpose()).eval() / typename Derived::Scalar(2);
  return out;
}

// Diagonal similarity D such that D^{-1} A D has comparable row and column
// norms (Parlett-Reinsch). Entries of D are powers of two so the similarity
// is exact in floating point.
template <typename Scalar>
VecX<Scalar> balancing_scales(const MatX<Scalar>& A) {
  const Eigen::Index n = A.rows();
  VecX<Scalar> d = VecX<Scalar>::Ones(n);
  MatX<Scalar> M = A;
  constexpr Scalar radix(2);
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar c = 0, r = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(M(j, i));
        r += std::abs(M(i, j));
      }
      if (c == Scalar(0) || r == Scalar(0)) continue;
      const Scalar s = c + r;
      Scalar f = 1;
      Scalar g = r / radix;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c >= g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < Scalar(0.95) * s) {
        converged = false;
        d(i) *= f;
        M.row(i) /= f;
        M.col(i) *= f;
      }
    }
  }
  return d;
}

// e^{A t} by scaling and squaring with a Pade approximant, applied to the
// balanced matrix.
template <typename Scalar>
MatX<Scalar> matrix_exponential(const MatX<Scalar>& A, Scalar t) {
  require_square(A, "matrix_exponential");
  require_finite(A, "matrix_exponential");
  if (!std::isfinite(static_cast<double>(t))) {
    throw InvalidInput("matrix_exponential: non-finite time");
  }
  if (A.size() == 0) return A;
  const VecX<Scalar> d = balancing_scales(A);
  MatX<Scalar> Ab = d.cwiseInverse().asDiagonal() * A * d.asDiagonal();
  MatX<Scalar> E = (Ab * t).exp();
  return d.asDiagonal() * E * d.cwiseInverse().asDiagonal();
}

// Eigendecomposition A = Q diag(lambdas) Q^{-1}, or nullopt when A is
// defective or too close to defective for the closed forms to be accurate.
template <typename Scalar>
std::optional<Eigendecomposition<Scalar>> diagonalize(const MatX<Scalar>& A) {
  require_square(A, "diagonalize");
  require_finite(A, "diagonalize");
  const Eigen::Index n = A.rows();
  if (n == 0) return Eigendecomposition<Scalar>{};

  const VecX<Scalar> d = balancing_scales(A);
  const MatX<Scalar> Ab = d.cwiseInverse().asDiagonal() * A * d.asDiagonal();
  Eigen::EigenSolver<MatX<Scalar>> es(Ab, true);
  if (es.info() != Eigen::Success) return std::nullopt;

  const CMatX<Scalar> Qb = es.eigenvectors();
  Eigen::JacobiSVD<CMatX<Scalar>> svd(Qb);
  const auto& sv = svd.singularValues();
  const Scalar smin = sv(n - 1);
  if (!(smin > Scalar(0))) return std::nullopt;
  const Scalar cond = sv(0) / smin;
  if (!(cond <= Scalar(kMaxEigenvectorCondition))) return std::nullopt;

  const CMatX<Scalar> Qb_inv = Qb.partialPivLu().inverse();
  Eigendecomposition<Scalar> out;
  out.lambdas = es.eigenvalues();
  out.Q = d.template cast<std::complex<Scalar>>().asDiagonal() * Qb;
  out.Qinv = Qb_inv * d.cwiseInverse().template cast<std::complex<Scalar>>().asDiagonal();
  out.condition = cond;

  const CMatX<Scalar> rec = Qb * out.lambdas.asDiagonal() * Qb_inv;
  const Scalar scale = std::max(Ab.norm(), std::numeric_limits<Scalar>::min());
  if ((rec - Ab.template cast<std::complex<Scalar>>()).norm() > Scalar(kMaxReconstructionError) * scale) {
    return std::nullopt;
  }
  return out;
}

namespace detail {

// (e^z - 1) / z, accurate near z = 0 where the quotient has limit 1.
template <typename Scalar>
std::complex<Scalar> expm1_over(std::complex<Scalar> z) {
  if (std::abs(z) < Scalar(0.5)) {
    std::complex<Scalar> term(1), sum(1);
    for (int k = 2; k < 40; ++k) {
      term *= z / Scalar(k);
      sum += term;
      if (std::abs(term) < std::numeric_limits<Scalar>::epsilon() * std::abs(sum)) break;
    }
    return sum;
  }
  return (std::exp(z) - Scalar(1)) / z;
}

enum class Direction { forward, backward };

// Q Theta Q^H for the closed-form Gramian; nullopt if the imaginary residue
// is too large to discard.
template <typename Scalar>
std::optional<MatX<Scalar>> closed_form_gramian(const Eigendecomposition<Scalar>& eig,
                                                const MatX<Scalar>& B, Scalar t, Direction dir) {
  using C = std::complex<Scalar>;
  const Eigen::Index n = eig.lambdas.size();
  const CMatX<Scalar> QiB = eig.Qinv * B.template cast<C>();
  const CMatX<Scalar> psi = QiB * QiB.adjoint();
  CMatX<Scalar> theta(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) {
      const C s = eig.lambdas(k) + std::conj(eig.lambdas(l));
      const C st = dir == Direction::forward ? s * t : -s * t;
      theta(k, l) = psi(k, l) * t * expm1_over(st);
    }
  }
  const CMatX<Scalar> G = eig.Q * theta * eig.Q.adjoint();
  const Scalar re_norm = G.real().norm();
  const Scalar im_norm = G.imag().norm();
  const Scalar floor = std::numeric_limits<Scalar>::epsilon() * B.squaredNorm() * std::abs(t);
  if (im_norm > Scalar(kMaxImaginaryResidue) * re_norm + floor) return std::nullopt;
  return symmetrized(G.real());
}

template <typename Scalar>
void check_gramian_args(const MatX<Scalar>& A, const MatX<Scalar>& B, Scalar t, const char* what) {
  require_square(A, what);
  require_finite(A, what);
  require_finite(B, what);
  if (B.rows() != A.rows()) throw InvalidInput(std::string(what) + ": B must have n rows");
  if (!(t >= Scalar(0)) || !std::isfinite(static_cast<double>(t))) {
    throw InvalidInput(std::string(what) + ": t must be finite and >= 0");
  }
}

}  // namespace detail

// int_0^t e^{A tau} B B^T e^{A^T tau} dtau via one exponential of the
// augmented matrix [[-A, B B^T], [0, A^T]] t.
template <typename Scalar>
GramianResult<Scalar> gramian_vanloan(const MatX<Scalar>& A, const MatX<Scalar>& B, Scalar t) {
  detail::check_gramian_args(A, B, t, "gramian_vanloan");
  const Eigen::Index n = A.rows();
  MatX<Scalar> M = MatX<Scalar>::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -A;
  M.topRightCorner(n, n) = B * B.transpose();
  M.bottomRightCorner(n, n) = A.transpose();
  const MatX<Scalar> E = matrix_exponential<Scalar>(M, t);
  const MatX<Scalar> G = E.bottomRightCorner(n, n).transpose() * E.topRightCorner(n, n);
  return {symmetrized(G), GramianMethod::van_loan};
}

template <typename Scalar>
GramianResult<Scalar> forward_gramian(const MatX<Scalar>& A, const MatX<Scalar>& B, Scalar t) {
  detail::check_gramian_args(A, B, t, "forward_gramian");
  if (t == Scalar(0)) return {MatX<Scalar>::Zero(A.rows(), A.rows()), GramianMethod::closed_form};
  if (auto eig = diagonalize(A)) {
    if (auto G = detail::closed_form_gramian(*eig, B, t, detail::Direction::forward)) {
      return {std::move(*G), GramianMethod::closed_form};
    }
  }
  return gramian_vanloan<Scalar>(A, B, t);
}

template <typename Scalar>
GramianResult<Scalar> backward_gramian(const MatX<Scalar>& A, const MatX<Scalar>& B, Scalar t) {
  detail::check_gramian_args(A, B, t, "backward_gramian");
  if (t == Scalar(0)) return {MatX<Scalar>::Zero(A.rows(), A.rows()), GramianMethod::closed_form};
  if (auto eig = diagonalize(A)) {
    if (auto G = detail::closed_form_gramian(*eig, B, t, detail::Direction::backward)) {
      return {std::move(*G), GramianMethod::closed_form};
    }
  }
  return gramian_vanloan<Scalar>(MatX<Scalar>(-A), B, t);
}

// int_0^t e^{A tau} dtau, exact for singular A (equals A^{-1}(e^{At} - I)
// when A is invertible).
template <typename Scalar>
MatX<Scalar> drift_integral(const MatX<Scalar>& A, Scalar t) {
  require_square(A, "drift_integral");
  require_finite(A, "drift_integral");
  if (!(t >= Scalar(0))) throw InvalidInput("drift_integral: t must be >= 0");
  const Eigen::Index n = A.rows();
  MatX<Scalar> M = MatX<Scalar>::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = A;
  M.topRightCorner(n, n).setIdentity();
  return matrix_exponential<Scalar>(M, t).topRightCorner(n, n);
}

template <typename Scalar>
bool is_hurwitz(const MatX<Scalar>& A) {
  require_square(A, "is_hurwitz");
  if (A.size() == 0) return true;
  const VecX<Scalar> d = balancing_scales(A);
  const MatX<Scalar> Ab = d.cwiseInverse().asDiagonal() * A * d.asDiagonal();
  const CVecX<Scalar> ev = Ab.eigenvalues();
  return (ev.real().array() < Scalar(0)).all();
}

// Stationary covariance sigma_u^2 int_0^inf e^{A tau} B B^T e^{A^T tau}
// dtau of a Hurwitz system, i.e. the solution of
// A V + V A^T + sigma_u^2 B B^T = 0.
template <typename Scalar>
MatX<Scalar> stationary_covariance(const MatX<Scalar>& A, const MatX<Scalar>& B, Scalar sigma_u) {
  using C = std::complex<Scalar>;
  require_square(A, "stationary_covariance");
  require_finite(A, "stationary_covariance");
  if (B.rows() != A.rows()) throw InvalidInput("stationary_covariance: B must have n rows");
  if (!is_hurwitz(A)) throw StabilityRequired("stationary covariance requires a Hurwitz A");
  const Eigen::Index n = A.rows();
  const Scalar s2 = sigma_u * sigma_u;

  if (auto eig = diagonalize(A)) {
    const CMatX<Scalar> QiB = eig->Qinv * B.template cast<C>();
    const CMatX<Scalar> psi = QiB * QiB.adjoint();
    CMatX<Scalar> theta(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index l = 0; l < n; ++l) {
        theta(k, l) = -psi(k, l) / (eig->lambdas(k) + std::conj(eig->lambdas(l)));
      }
    }
    const CMatX<Scalar> V = eig->Q * theta * eig->Q.adjoint();
    if (V.imag().norm() <= Scalar(kMaxImaginaryResidue) * V.real().norm()) {
      return symmetrized(MatX<Scalar>(s2 * V.real()));
    }
  }

  // Vectorized Lyapunov equation (I kron A + A kron I) vec(V) = -vec(s2 B B^T),
  // solved in the balanced frame.
  const VecX<Scalar> d = balancing_scales(A);
  const MatX<Scalar> Ab = d.cwiseInverse().asDiagonal() * A * d.asDiagonal();
  const MatX<Scalar> Bb = d.cwiseInverse().asDiagonal() * B;
  const MatX<Scalar> I = MatX<Scalar>::Identity(n, n);
  MatX<Scalar> K = MatX<Scalar>::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) = I(i, j) * Ab + Ab(i, j) * I;
    }
  }
  const MatX<Scalar> rhs = -s2 * Bb * Bb.transpose();
  const VecX<Scalar> v = K.fullPivLu().solve(Eigen::Map<const VecX<Scalar>>(rhs.data(), n * n));
  const MatX<Scalar> Vb = Eigen::Map<const MatX<Scalar>>(v.data(), n, n);
  return symmetrized(MatX<Scalar>(d.asDiagonal() * Vb * d.asDiagonal()));
}

}  // namespace linalg
}  // namespace ctsmooth
