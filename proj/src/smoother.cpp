#include "ctsmooth/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ctsmooth {

void MeasurementSet::validate(Eigen::Index output_dim) const {
  if (values.size() != times.size()) throw InvalidInput("measurements: times and values differ in length");
  if (vz_override && vz_override->size() != times.size()) {
    throw InvalidInput("measurements: vz_override length differs from times");
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k])) throw InvalidInput("measurements: non-finite time");
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw InvalidInput("measurements: times must be strictly increasing (sample " + std::to_string(k) + ")");
    }
    if (values[k].size() != output_dim) throw InvalidInput("measurements: value dimension must equal the output dimension");
    if (!values[k].allFinite()) throw InvalidInput("measurements: non-finite value");
    if (vz_override && (*vz_override)[k].size() != output_dim) {
      throw InvalidInput("measurements: vz_override dimension mismatch");
    }
  }
}

MomentGaussian default_prior(const ContinuousLTISystem& system) {
  if (!linalg::is_hurwitz<double>(system.A)) {
    throw StabilityRequired("default prior needs a Hurwitz A; pass an explicit prior");
  }
  return {Vec::Zero(system.state_dim()), linalg::stationary_covariance<double>(system.A, system.B, system.sigma_u)};
}

namespace {

InfoGaussian apply_observation(const InfoGaussian& msg, const SmootherState& state, const Knot& knot,
                               const MeasurementSet& meas) {
  if (!knot.measurement) return observe(msg);
  const std::size_t k = *knot.measurement;
  const ContinuousLTISystem& sys = state.segment_system(knot.segment);
  const Vec& vz = meas.vz_override ? (*meas.vz_override)[k] : sys.vz;
  return observe<double>(msg, sys.C, vz, meas.values[k]);
}

}  // namespace

SmootherState run(const SegmentedSystem& system, const MeasurementSet& meas, const MomentGaussian& prior,
                  double t0, std::optional<double> t_end) {
  system.validate();
  const auto n = system.state_dim();
  if (prior.m.size() != n || prior.V.rows() != n || prior.V.cols() != n) {
    throw InvalidInput("run: prior dimension mismatch");
  }
  if (!prior.V.isApprox(prior.V.transpose(), 1e-10) && !prior.V.isZero(0)) {
    throw InvalidInput("run: prior covariance must be symmetric");
  }
  if (!meas.times.empty() && !(meas.times.front() > t0)) {
    throw InvalidInput("run: measurements must lie after t0");
  }
  const double end = t_end.value_or(meas.times.empty() ? t0 : meas.times.back());
  if (!(end >= t0) || (!meas.times.empty() && end < meas.times.back())) {
    throw InvalidInput("run: t_end must cover all measurements");
  }
  // segment_at throws when t0 is not covered by any segment.
  (void)system.segment_at(t0);
  const auto nu = system.segments.front().system.output_dim();
  for (const auto& seg : system.segments) {
    if (seg.system.output_dim() != nu) throw InvalidInput("run: all segments must share the output dimension");
  }
  meas.validate(nu);

  SmootherState state;
  state.system = std::make_shared<const SegmentedSystem>(system);
  state.t0 = t0;
  state.t_end = end;

  // Knots: t0, interior segment boundaries, measurement times, t_end.
  std::vector<double> times{t0};
  for (const auto& seg : system.segments) {
    if (seg.t_start > t0 && seg.t_start < end) times.push_back(seg.t_start);
  }
  times.insert(times.end(), meas.times.begin(), meas.times.end());
  times.push_back(end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  state.knots.resize(times.size());
  std::size_t next_meas = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    Knot& knot = state.knots[i];
    knot.t = times[i];
    knot.segment = state.system->segment_at(knot.t);
    if (next_meas < meas.times.size() && meas.times[next_meas] == knot.t) knot.measurement = next_meas++;
  }

  state.transitions.reserve(times.size() - 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    state.transitions.push_back(make_transition(state.segment_system(state.knots[i].segment), times[i + 1] - times[i]));
  }

  const InfoGaussian flat = InfoGaussian::flat(n);
  for (std::size_t i = 0; i < state.knots.size(); ++i) {
    Knot& knot = state.knots[i];
    knot.fwd_pre = i == 0 ? prior : forward_through(state.transitions[i - 1], state.knots[i - 1].fwd_post);
    if (knot.measurement) {
      const std::size_t k = *knot.measurement;
      const ContinuousLTISystem& sys = state.segment_system(knot.segment);
      const Vec& vz = meas.vz_override ? (*meas.vz_override)[k] : sys.vz;
      knot.fwd_post = observe<double>(knot.fwd_pre, sys.C, vz, meas.values[k]);
    } else {
      knot.fwd_post = knot.fwd_pre;
    }
  }
  for (std::size_t i = state.knots.size(); i-- > 0;) {
    Knot& knot = state.knots[i];
    knot.bwd_pre = i + 1 == state.knots.size() ? flat : backward_through(state.transitions[i], state.knots[i + 1].bwd_post);
    knot.bwd_post = apply_observation(knot.bwd_pre, state, knot, meas);
  }
  return state;
}

SmootherState run(const ContinuousLTISystem& system, const MeasurementSet& meas, const MomentGaussian& prior,
                  double t0, std::optional<double> t_end) {
  return run(SegmentedSystem::single(system), meas, prior, t0, t_end);
}

namespace {

using TransitionCache = std::map<std::pair<std::size_t, double>, TransitionFactor>;

const TransitionFactor& sub_transition(const SmootherState& state, std::size_t segment, double T,
                                       TransitionCache& cache) {
  auto key = std::make_pair(segment, T);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, make_transition(state.segment_system(segment), T)).first;
  }
  return it->second;
}

EstimateRecord query_impl(const SmootherState& state, double t, TransitionCache& cache) {
  if (!(t >= state.t0 && t <= state.t_end)) {
    throw OutOfDomain("query: t = " + std::to_string(t) + " outside [" + std::to_string(state.t0) + ", " +
                      std::to_string(state.t_end) + "]");
  }
  const auto& knots = state.knots;
  MomentGaussian fwd;
  InfoGaussian bwd;
  std::size_t segment;
  const Knot* at_knot = nullptr;
  if (t == knots.front().t) {
    fwd = knots.front().fwd_post;
    bwd = knots.front().bwd_pre;
    segment = knots.front().segment;
  } else {
    auto it = std::lower_bound(knots.begin(), knots.end(), t, [](const Knot& k, double v) { return k.t < v; });
    const std::size_t j = static_cast<std::size_t>(std::distance(knots.begin(), it));
    const std::size_t i = j - 1;
    segment = knots[i].segment;
    if (knots[j].t == t) {
      fwd = knots[j].fwd_pre;
      bwd = knots[j].bwd_post;
      at_knot = &knots[j];
    } else {
      fwd = forward_through(sub_transition(state, segment, t - knots[i].t, cache), knots[i].fwd_post);
      bwd = backward_through(sub_transition(state, segment, knots[j].t - t, cache), knots[j].bwd_post);
    }
  }

  // The sample at a knot is better absorbed in moment form (fwd_post).
  const MomentGaussian post = at_knot ? combine(at_knot->fwd_post, at_knot->bwd_pre) : combine(fwd, bwd);
  const ContinuousLTISystem& out_sys = state.system->at(t);
  EstimateRecord rec;
  rec.t = t;
  rec.x_mean = post.m;
  rec.x_cov = post.V;
  rec.y_hat = out_sys.C * post.m;
  rec.y_var = out_sys.C * post.V * out_sys.C.transpose();
  rec.u_hat = input_estimate(fwd, bwd, state.segment_system(segment));
  return rec;
}

}  // namespace

EstimateRecord query(const SmootherState& state, double t) {
  TransitionCache cache;
  return query_impl(state, t, cache);
}

std::vector<EstimateRecord> query_grid(const SmootherState& state, const std::vector<double>& grid) {
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] >= grid[k - 1])) throw InvalidInput("query_grid: grid must be sorted");
  }
  TransitionCache cache;
  std::vector<EstimateRecord> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(query_impl(state, t, cache));
  return out;
}

}  // namespace ctsmooth
