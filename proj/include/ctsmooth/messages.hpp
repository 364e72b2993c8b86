#pragma once

// Gaussian messages and the local update rules for the continuous-time
// transition node f(x(t1) | x(t0)), observation nodes, and the posterior
// combination of forward and backward messages.
//
// Forward messages are kept in moment form (m, V) and backward messages in
// information form (W, xi = W m): the backward recursion starts from a flat
// message (W = 0) whose covariance does not exist. Every rule below is
// written so that it stays valid for singular W or singular V.

#include <cmath>
#include <string>

#include "ctsmooth/linalg.hpp"
#include "ctsmooth/model.hpp"

namespace ctsmooth {

template <typename Scalar>
struct BasicMomentGaussian {
  VecX<Scalar> m;
  MatX<Scalar> V;

  Eigen::Index dim() const { return m.size(); }
};

template <typename Scalar>
struct BasicInfoGaussian {
  MatX<Scalar> W;
  VecX<Scalar> xi;

  Eigen::Index dim() const { return xi.size(); }

  static BasicInfoGaussian flat(Eigen::Index n) {
    return {MatX<Scalar>::Zero(n, n), VecX<Scalar>::Zero(n)};
  }
  bool is_flat() const { return W.isZero(0) && xi.isZero(0); }
};

// Exact transition over an interval of length T for one time-invariant
// system: x(t0 + T) = Phi x(t0) + drift + w,  w ~ N(0, Vs).
template <typename Scalar>
struct BasicTransitionFactor {
  MatX<Scalar> Phi;
  VecX<Scalar> drift;
  MatX<Scalar> Vs;
  MatX<Scalar> Vs_back;  // Phi^{-1} Vs Phi^{-T}
  Scalar T = Scalar(0);
  const LtiSystem<Scalar>* system = nullptr;
};

using MomentGaussian = BasicMomentGaussian<double>;
using InfoGaussian = BasicInfoGaussian<double>;
using TransitionFactor = BasicTransitionFactor<double>;

namespace detail {

template <typename Scalar>
void check_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(got) +
                       " vs " + std::to_string(want) + ")");
  }
}

// Factorization used for every (I + W V)^{-1} and (I + V W)^{-1} with W, V
// PSD: V = S S^T, G = I + S^T W S (SPD, eigenvalues >= 1). Then
//   (I + W V)^{-1} = I - W S G^{-1} S^T,  (I + V W)^{-1} = I - S G^{-1} S^T W.
// Badly scaled states leave G huge but never singular.
template <typename Scalar>
struct IdentityPlus {
  MatX<Scalar> S;
  MatX<Scalar> WS;
  Eigen::LDLT<MatX<Scalar>> G;
  VecX<Scalar> pivots;

  IdentityPlus(const MatX<Scalar>& W, const MatX<Scalar>& V, const char* what) {
    const Eigen::Index n = V.rows();
    // Eigen flags negative pivots; here they are round-off and get clamped.
    Eigen::LDLT<MatX<Scalar>> ldlt(V);
    const VecX<Scalar> d = ldlt.vectorD().cwiseMax(Scalar(0)).cwiseSqrt();
    MatX<Scalar> L = ldlt.matrixL();
    S = ldlt.transpositionsP().transpose() * MatX<Scalar>(L * d.asDiagonal());
    WS = W * S;
    G.compute(MatX<Scalar>::Identity(n, n) + linalg::symmetrized(MatX<Scalar>(S.transpose() * WS)));
    if (!S.allFinite() || !WS.allFinite() || !G.vectorD().allFinite()) {
      throw ConditioningError(std::string(what) + ": non-finite message");
    }
    // Every pivot of a matrix >= I is >= 1; smaller ones are cancellation.
    pivots = G.vectorD().cwiseMax(Scalar(1));
  }

  MatX<Scalar> solve(const MatX<Scalar>& R) const {
    MatX<Scalar> X = G.transpositionsP() * R;
    G.matrixL().solveInPlace(X);
    X = pivots.cwiseInverse().asDiagonal() * X;
    G.matrixU().solveInPlace(X);
    return G.transpositionsP().transpose() * X;
  }
  // (I + W V)^{-1} R
  MatX<Scalar> left(const MatX<Scalar>& R) const { return R - WS * solve(S.transpose() * R); }
  // S G^{-1} S^T
  MatX<Scalar> sandwich() const { return S * solve(S.transpose()); }
};

}  // namespace detail

template <typename Scalar>
BasicTransitionFactor<Scalar> make_transition(const LtiSystem<Scalar>& system, Scalar T) {
  if (!(T > Scalar(0)) || !std::isfinite(static_cast<double>(T))) {
    throw InvalidInput("make_transition: T must be finite and > 0");
  }
  if (!(system.sigma_u > Scalar(0))) throw InvalidInput("make_transition: sigma_u must be > 0");
  const Scalar s2 = system.sigma_u * system.sigma_u;
  BasicTransitionFactor<Scalar> f;
  f.Phi = linalg::matrix_exponential(system.A, T);
  f.drift = linalg::drift_integral(system.A, T) * system.h;
  f.Vs = s2 * linalg::forward_gramian(system.A, system.B, T).value;
  f.Vs_back = s2 * linalg::backward_gramian(system.A, system.B, T).value;
  f.T = T;
  f.system = &system;
  return f;
}

// m' = Phi m + drift,  V' = Phi V Phi^T + Vs.
template <typename Scalar>
BasicMomentGaussian<Scalar> forward_through(const BasicTransitionFactor<Scalar>& f,
                                            const BasicMomentGaussian<Scalar>& msg) {
  detail::check_dim<Scalar>(msg.dim(), f.Phi.rows(), "forward_through");
  BasicMomentGaussian<Scalar> out;
  out.m = f.Phi * msg.m + f.drift;
  out.V = linalg::symmetrized(MatX<Scalar>(f.Phi * msg.V * f.Phi.transpose() + f.Vs));
  return out;
}

// Information form of m' = Phi^{-1}(m - drift), V' = Phi^{-1}(V + Vs)Phi^{-T}:
//   W' = Phi^T (I + W Vs)^{-1} W Phi,  xi' = Phi^T (I + W Vs)^{-1} (xi - W drift).
template <typename Scalar>
BasicInfoGaussian<Scalar> backward_through(const BasicTransitionFactor<Scalar>& f,
                                           const BasicInfoGaussian<Scalar>& msg) {
  detail::check_dim<Scalar>(msg.dim(), f.Phi.rows(), "backward_through");
  const detail::IdentityPlus<Scalar> ip(msg.W, f.Vs, "backward_through");
  BasicInfoGaussian<Scalar> out;
  const MatX<Scalar> W = msg.W - ip.WS * ip.solve(ip.WS.transpose());
  out.W = linalg::symmetrized(MatX<Scalar>(f.Phi.transpose() * W * f.Phi));
  out.xi = f.Phi.transpose() * ip.left(MatX<Scalar>(msg.xi - msg.W * f.drift)).col(0);
  return out;
}

// Absorb an observation y ~ N(C x, diag(vz)) into a backward message.
template <typename Scalar>
BasicInfoGaussian<Scalar> observe(const BasicInfoGaussian<Scalar>& msg, const MatX<Scalar>& C,
                                  const VecX<Scalar>& vz, const VecX<Scalar>& y) {
  detail::check_dim<Scalar>(C.cols(), msg.dim(), "observe");
  detail::check_dim<Scalar>(vz.size(), C.rows(), "observe");
  detail::check_dim<Scalar>(y.size(), C.rows(), "observe");
  if ((vz.array() <= Scalar(0)).any()) {
    throw Unsupported("observe: exact (noise-free) observations are not supported");
  }
  const VecX<Scalar> inv = vz.cwiseInverse();
  BasicInfoGaussian<Scalar> out;
  out.W = linalg::symmetrized(MatX<Scalar>(msg.W + C.transpose() * inv.asDiagonal() * C));
  out.xi = msg.xi + C.transpose() * inv.asDiagonal() * y;
  return out;
}

// Measurement update of a forward moment message (gain form, Joseph
// covariance). Equals combine(msg, observe(flat, C, vz, y)) but keeps
// accuracy when vz is tiny next to C V C^T.
template <typename Scalar>
BasicMomentGaussian<Scalar> observe(const BasicMomentGaussian<Scalar>& msg, const MatX<Scalar>& C,
                                    const VecX<Scalar>& vz, const VecX<Scalar>& y) {
  detail::check_dim<Scalar>(C.cols(), msg.dim(), "observe");
  detail::check_dim<Scalar>(vz.size(), C.rows(), "observe");
  detail::check_dim<Scalar>(y.size(), C.rows(), "observe");
  if ((vz.array() <= Scalar(0)).any()) {
    throw Unsupported("observe: exact (noise-free) observations are not supported");
  }
  const Eigen::Index n = msg.dim();
  const MatX<Scalar> VCt = msg.V * C.transpose();
  MatX<Scalar> Sy = C * VCt;
  Sy.diagonal() += vz;
  Eigen::LDLT<MatX<Scalar>> ldlt(linalg::symmetrized(Sy));
  if (ldlt.info() != Eigen::Success) throw ConditioningError("observe: innovation covariance is not positive");
  const MatX<Scalar> K = ldlt.solve(VCt.transpose()).transpose();
  const MatX<Scalar> IKC = MatX<Scalar>::Identity(n, n) - K * C;
  BasicMomentGaussian<Scalar> out;
  out.m = msg.m + K * (y - C * msg.m);
  out.V = linalg::symmetrized(MatX<Scalar>(IKC * msg.V * IKC.transpose() + K * vz.asDiagonal() * K.transpose()));
  return out;
}

// Unobserved sample: the message passes unchanged.
template <typename Scalar>
BasicInfoGaussian<Scalar> observe(const BasicInfoGaussian<Scalar>& msg) {
  return msg;
}

// Posterior from a forward moment message and a backward information
// message: V = (I + V_f W_b)^{-1} V_f,  m = m_f + V (xi_b - W_b m_f).
template <typename Scalar>
BasicMomentGaussian<Scalar> combine(const BasicMomentGaussian<Scalar>& fwd,
                                    const BasicInfoGaussian<Scalar>& bwd) {
  detail::check_dim<Scalar>(bwd.dim(), fwd.dim(), "combine");
  const detail::IdentityPlus<Scalar> ip(bwd.W, fwd.V, "combine");
  MatX<Scalar> V = linalg::symmetrized(ip.sandwich());
  VecX<Scalar> m = fwd.m + V * (bwd.xi - bwd.W * fwd.m);
  return {std::move(m), std::move(V)};
}

// Input estimate sigma_u^2 B^T (V_f + V_b)^{-1} (m_b - m_f), evaluated as
// sigma_u^2 B^T (I + W_b V_f)^{-1} (xi_b - W_b m_f) so that a flat backward
// message yields zero.
template <typename Scalar>
VecX<Scalar> input_estimate(const BasicMomentGaussian<Scalar>& fwd, const BasicInfoGaussian<Scalar>& bwd,
                            const LtiSystem<Scalar>& system) {
  detail::check_dim<Scalar>(bwd.dim(), fwd.dim(), "input_estimate");
  detail::check_dim<Scalar>(system.B.rows(), fwd.dim(), "input_estimate");
  if (!(system.sigma_u > Scalar(0))) throw InvalidInput("input_estimate: sigma_u must be > 0");
  const VecX<Scalar> r = bwd.xi - bwd.W * fwd.m;
  const VecX<Scalar> g = detail::IdentityPlus<Scalar>(bwd.W, fwd.V, "input_estimate").left(MatX<Scalar>(r)).col(0);
  return system.sigma_u * system.sigma_u * system.B.transpose() * g;
}

}  // namespace ctsmooth
