#pragma once

#include <ostream>
#include <vector>

#include "config.hpp"
#include "ctsmooth/messages.hpp"
#include "ctsmooth/smoother.hpp"

namespace ctsmooth::cli {

// Entry point shared by the executable and the tests; returns the exit
// code (0 ok, 1 usage, 2 data error, 3 check failure).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Zero-mean prior on x(t0): isotropic when the config sets prior_var,
// otherwise stationary.
MomentGaussian config_prior(const ModelConfig& cfg, const ContinuousLTISystem& system);

// System used for estimation when a different SNR is assumed: sigma_u is
// scaled so that the model SNR equals assumed_snr_db.
ContinuousLTISystem with_assumed_snr(const ContinuousLTISystem& system, double assumed_snr_db);

struct OracleCheckInput {
  ContinuousLTISystem system;
  MeasurementSet meas;
  MomentGaussian prior;
  double t0 = 0.0;
  std::vector<int> substeps{64, 128, 256, 512, 1024, 2048, 4096};
  // Multiplies sigma_u in the oracle only; values other than 1 make the
  // two estimators disagree (negative control).
  double oracle_sigma_scale = 1.0;
};

struct OracleCheckRow {
  int N = 0;
  double u_error = 0.0;  // relative L2 error over the comparison grid
  double x_error = 0.0;
};

struct OracleCheckReport {
  std::vector<OracleCheckRow> rows;
  double slope = 0.0;  // of log u_error against log N
  bool exact = false;  // every error at round-off level
  bool passed = false;
};

// Compares the smoother with the discrete joint least-squares solution on
// the substep grid of the coarsest N (every N must be a multiple of it).
OracleCheckReport oracle_check(const OracleCheckInput& input);

}  // namespace ctsmooth::cli
