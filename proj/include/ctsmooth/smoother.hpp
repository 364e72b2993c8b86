#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ctsmooth/messages.hpp"
#include "ctsmooth/model.hpp"

namespace ctsmooth {

struct MeasurementSet {
  std::vector<double> times;  // strictly increasing
  std::vector<Vec> values;
  // Per-sample diagonal noise variances; replaces the system's vz when set.
  std::optional<std::vector<Vec>> vz_override;

  std::size_t size() const { return times.size(); }
  void validate(Eigen::Index output_dim) const;
};

struct Knot {
  double t = 0.0;
  std::optional<std::size_t> measurement;  // index into MeasurementSet
  std::size_t segment = 0;                 // segment governing [t, next knot)
  MomentGaussian fwd_pre;   // forward message before the observation at t
  MomentGaussian fwd_post;  // ... and after it
  InfoGaussian bwd_pre;     // backward message from the future, excluding the observation at t
  InfoGaussian bwd_post;    // ... and including it
};

struct EstimateRecord {
  double t = 0.0;
  Vec x_mean;
  Mat x_cov;
  Vec y_hat;
  Mat y_var;
  Vec u_hat;
};

// Result of a forward-backward sweep. Immutable after run(); query() and
// query_grid() may be called concurrently.
struct SmootherState {
  std::shared_ptr<const SegmentedSystem> system;
  std::vector<Knot> knots;
  std::vector<TransitionFactor> transitions;  // transitions[i] spans knots[i] -> knots[i+1]
  double t0 = 0.0;
  double t_end = 0.0;

  const ContinuousLTISystem& segment_system(std::size_t k) const { return system->segments[k].system; }
};

// Zero-mean prior with the stationary state covariance; requires Hurwitz A.
MomentGaussian default_prior(const ContinuousLTISystem& system);

SmootherState run(const SegmentedSystem& system, const MeasurementSet& meas, const MomentGaussian& prior,
                  double t0, std::optional<double> t_end = std::nullopt);
SmootherState run(const ContinuousLTISystem& system, const MeasurementSet& meas, const MomentGaussian& prior,
                  double t0, std::optional<double> t_end = std::nullopt);

// Posterior at an arbitrary t in [t0, t_end]. The state posterior is
// continuous in t; the input estimate jumps at observation instants and is
// reported as its limit from the left there (the right limit at t0).
EstimateRecord query(const SmootherState& state, double t);

// Equivalent to mapping query() over an increasing grid; transition
// factors for repeated sub-interval lengths are computed once.
std::vector<EstimateRecord> query_grid(const SmootherState& state, const std::vector<double>& grid);

}  // namespace ctsmooth
