#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "ctsmooth/linalg.hpp"

namespace ctsmooth {

// dX = (A X + B U + h) dt,  Y_k = C X(t_k),  Ytilde_k = Y_k + Z_k.
// Each input channel is white Gaussian noise with intensity sigma_u^2;
// Z_k ~ N(0, diag(vz)).
template <typename Scalar>
struct LtiSystem {
  MatX<Scalar> A;
  MatX<Scalar> B;
  MatX<Scalar> C;
  VecX<Scalar> h;
  Scalar sigma_u = Scalar(1);
  VecX<Scalar> vz;  // diagonal of the observation-noise covariance

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return C.rows(); }

  MatX<Scalar> Vz() const { return vz.asDiagonal(); }

  // Throws InvalidInput on inconsistent dimensions or non-positive noise
  // levels. simulate() alone accepts sigma_u == 0.
  void validate(bool allow_zero_sigma_u = false) const {
    const auto n = A.rows();
    if (A.cols() != n) throw InvalidInput("system: A must be square");
    if (B.rows() != n) throw InvalidInput("system: B must have n rows");
    if (C.cols() != n) throw InvalidInput("system: C must have n columns");
    if (h.size() != n) throw InvalidInput("system: h must have length n");
    if (vz.size() != C.rows()) throw InvalidInput("system: vz must have one entry per output");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !h.allFinite() || !vz.allFinite()) {
      throw InvalidInput("system: non-finite entries");
    }
    if (allow_zero_sigma_u ? !(sigma_u >= Scalar(0)) : !(sigma_u > Scalar(0))) {
      throw InvalidInput("system: sigma_u must be positive");
    }
    if ((vz.array() <= Scalar(0)).any()) throw InvalidInput("system: vz entries must be positive");
  }

  static LtiSystem make(MatX<Scalar> A, MatX<Scalar> B, MatX<Scalar> C, Scalar sigma_u,
                        VecX<Scalar> vz) {
    LtiSystem s;
    s.h = VecX<Scalar>::Zero(A.rows());
    s.A = std::move(A);
    s.B = std::move(B);
    s.C = std::move(C);
    s.sigma_u = sigma_u;
    s.vz = std::move(vz);
    return s;
  }
};

using ContinuousLTISystem = LtiSystem<double>;
using Mat = MatX<double>;
using Vec = VecX<double>;

// Piecewise time-invariant dynamics; segment k governs [t_start_k, t_start_{k+1}).
struct SegmentedSystem {
  struct Segment {
    double t_start;
    ContinuousLTISystem system;
  };
  std::vector<Segment> segments;

  static SegmentedSystem single(const ContinuousLTISystem& sys);
  void validate(bool allow_zero_sigma_u = false) const;
  // Index of the segment governing t. Throws if t precedes the first segment.
  std::size_t segment_at(double t) const;
  const ContinuousLTISystem& at(double t) const { return segments[segment_at(t)].system; }
  Eigen::Index state_dim() const { return segments.front().system.state_dim(); }
};

// Order-n Butterworth lowpass in controllable canonical form with unit DC
// gain: b = (0, ..., 0, wc^n)^T, c = (1, 0, ..., 0).
ContinuousLTISystem butterworth(int order, double fc_hz, double sigma_u, double sigma_z);

// |C (j 2 pi f I - A)^{-1} B e_col| for a single-output system.
double transfer_magnitude(const ContinuousLTISystem& system, double f_hz, Eigen::Index input_col = 0);

struct FixedInitialState {
  Vec x0;
};
// Draw X(t0) ~ N(0, stationary covariance); requires a Hurwitz A.
struct StationaryInitialState {};
using InitialState = std::variant<StationaryInitialState, FixedInitialState>;

struct SimulationOptions {
  double t0 = 0.0;
  InitialState initial = StationaryInitialState{};
  std::uint64_t seed = 0;
  std::optional<double> dense_step;
  // Record truth at every grid point even without a dense step (the grid
  // is then the schedule itself).
  bool record_truth = false;
};

struct TruthRecord {
  double t;
  Vec x;
  Vec y;
  // Average of U over the step ending at t (zero at t0).
  Vec u_avg;
};

struct SimulationOutput {
  std::vector<double> times;
  std::vector<Vec> knot_states;
  std::vector<Vec> clean_samples;
  std::vector<Vec> noisy_samples;
  std::vector<TruthRecord> dense_truth;
};

// Exact sample-path simulation: the state is advanced with the discretized
// transition (e^{AT}, drift, sigma_u^2 Gramian) between consecutive grid
// points, so no time-step error is incurred.
SimulationOutput simulate(const SegmentedSystem& system, const std::vector<double>& schedule,
                          const SimulationOptions& options);
SimulationOutput simulate(const ContinuousLTISystem& system, const std::vector<double>& schedule,
                          const SimulationOptions& options);

// Regular schedule t_k = t0 + k / fs for k = 1 .. floor(duration * fs).
std::vector<double> regular_schedule(double fs, double duration, double t0 = 0.0);

}  // namespace ctsmooth
