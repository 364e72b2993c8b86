#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ctsmooth/model.hpp"

namespace ctsmooth::analysis {

struct SnrReport {
  double ey2 = 0.0;  // stationary E[Y_k^2]
  double snr_linear = 0.0;
  double snr_db = 0.0;
  // snr * sigma_z^2 / (sigma_u^2 fc); only when a cutoff is declared.
  std::optional<double> snr_constant;
};

// Stationary state covariance of a Hurwitz system.
Mat stationary_state_cov(const ContinuousLTISystem& system);

// Observation SNR E[Y_k^2] / sigma_z^2 of a single-output stationary system.
SnrReport snr(const ContinuousLTISystem& system, std::optional<double> fc_hz = std::nullopt);

// Copy of system with sigma_z chosen so that the observation SNR equals
// snr_db (sigma_u unchanged).
ContinuousLTISystem with_snr_db(const ContinuousLTISystem& system, double snr_db);

struct ErrorCurveOptions {
  std::vector<double> fs_over_fc;
  std::vector<double> snr_db;
  int trials = 50;
  int horizon_samples = 500;
  std::uint64_t seed = 1;
  // Fraction of samples discarded at each end before averaging.
  double edge_guard = 0.1;
  // Worker threads; results do not depend on this value.
  unsigned threads = 0;
};

struct ErrorCurveCell {
  double fs_over_fc = 0.0;
  double snr_db = 0.0;
  double snr_out_inv = 0.0;  // E[(Yhat_k - Y_k)^2] / E[Y_k^2]
  double snr_out_inv_db = 0.0;
};

// Monte Carlo estimate of the normalized output error for every
// (fs/fc, SNR) pair: each trial simulates horizon_samples regular samples
// from the stationary system, smooths them with the true model, and
// compares the posterior mean of Y_k with the clean samples over the
// interior of the record. The denominator is the stationary E[Y_k^2].
std::vector<ErrorCurveCell> output_error_curve(const ContinuousLTISystem& system, double fc_hz,
                                               const ErrorCurveOptions& options);

// Least-squares slope of snr_out_inv_db against log2(fs/fc) for the cells
// with the given input SNR (dB per doubling of the sampling rate).
double oversampling_slope(const std::vector<ErrorCurveCell>& cells, double snr_db);

}  // namespace ctsmooth::analysis
