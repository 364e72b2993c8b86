#pragma once

// Brute-force references for the message-passing smoother.
//
// Each interval (t_{k-1}, t_k] is cut into N substeps of width T_k/N. On a
// substep the input is replaced by its average u~ ~ N(0, sigma_u^2 N / T_k)
// entering as x <- e^{A T_k/N} x + drift + B (T_k/N) u~. For finite N this
// is a plain linear-Gaussian model in the unknowns (x(t0), u~_1, ..., u~_L)
// and its MAP estimate minimizes
//
//   (x0 - m)^T P^+ (x0 - m) + (1/sigma_u^2) sum_l |u~_l|^2 T_k/N
//                           + sum_k (y~_k - C x(t_k))^T Vz^{-1} (y~_k - C x(t_k)),
//
// which tends to the continuous-time regularized least-squares cost as
// N grows.

#include <vector>

#include "ctsmooth/messages.hpp"
#include "ctsmooth/model.hpp"
#include "ctsmooth/smoother.hpp"

namespace ctsmooth::oracle {

struct DiscreteInterval {
  double t_begin = 0.0;
  double t_end = 0.0;
  Mat step;           // e^{A T/N}
  Mat gain;           // B T/N
  double input_var;   // variance of each u~ component, sigma_u^2 N / T
  Vec drift;          // int_0^{T/N} e^{A tau} dtau h
  int n_sub = 1;

  double substep() const { return (t_end - t_begin) / static_cast<double>(n_sub); }
};

struct DiscreteDecomposition {
  int N = 1;
  double t0 = 0.0;
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;
  std::vector<DiscreteInterval> intervals;
  std::vector<double> substep_times;  // right end of every substep, L = N K entries

  std::size_t substeps() const { return substep_times.size(); }
  std::size_t interval_of(std::size_t substep) const { return substep / static_cast<std::size_t>(N); }
};

DiscreteDecomposition discrete_decompose(const ContinuousLTISystem& system, const std::vector<double>& meas_times,
                                         int N, double t0);

enum class SolveRoute {
  automatic,
  // Normal equations over all stacked unknowns; needs an invertible prior.
  primal,
  // Equivalent system in observation space (K nu unknowns); handles
  // singular priors and very fine decompositions.
  dual,
};

struct JointLSSolution {
  Vec x0;
  std::vector<Vec> u;       // u~ per substep
  std::vector<Vec> x_path;  // state at t0 and at every substep end (L + 1 entries)
  double cost = 0.0;
  double energy_term = 0.0;
  double misfit_term = 0.0;
  double prior_term = 0.0;
  SolveRoute route = SolveRoute::automatic;
};

struct JointLSOptions {
  SolveRoute route = SolveRoute::automatic;
  // Largest stacked-unknown count the primal route accepts.
  std::size_t primal_limit = 2000;
  // Largest entry count of the dense observation-sensitivity matrix.
  std::size_t dense_limit = 50'000'000;
};

JointLSSolution joint_ls_solve(const DiscreteDecomposition& decomp, const MeasurementSet& meas,
                               const MomentGaussian& prior, const ContinuousLTISystem& system,
                               const JointLSOptions& options = {});

// Objective of the discrete least-squares problem for a candidate input
// path, with x(t0) set to its optimal value given that path.
double cost_of(const DiscreteDecomposition& decomp, const MeasurementSet& meas, const std::vector<Vec>& u,
               const MomentGaussian& prior, const ContinuousLTISystem& system);

// Marginal posterior precision (m x m) of every u~ in the discrete model.
std::vector<Mat> input_posterior_precision(const DiscreteDecomposition& decomp, const MeasurementSet& meas,
                                           const MomentGaussian& prior, const ContinuousLTISystem& system);

// Composite Simpson rule for int_0^t e^{A tau} B B^T e^{A^T tau} dtau;
// steps must be even and >= 2.
Mat quadrature_gramian(const Mat& A, const Mat& B, double t, int steps);

}  // namespace ctsmooth::oracle
