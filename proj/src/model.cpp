#include "ctsmooth/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gaussian_draw.hpp"

namespace ctsmooth {

SegmentedSystem SegmentedSystem::single(const ContinuousLTISystem& sys) {
  return SegmentedSystem{{{-std::numeric_limits<double>::infinity(), sys}}};
}

void SegmentedSystem::validate(bool allow_zero_sigma_u) const {
  if (segments.empty()) throw InvalidInput("segmented system: no segments");
  const auto n = segments.front().system.state_dim();
  for (std::size_t k = 0; k < segments.size(); ++k) {
    segments[k].system.validate(allow_zero_sigma_u);
    if (segments[k].system.state_dim() != n) {
      throw InvalidInput("segmented system: all segments must share the state dimension");
    }
    if (k > 0 && !(segments[k].t_start > segments[k - 1].t_start)) {
      throw InvalidInput("segmented system: segment start times must be strictly increasing");
    }
  }
}

std::size_t SegmentedSystem::segment_at(double t) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double v, const Segment& s) { return v < s.t_start; });
  if (it == segments.begin()) {
    throw OutOfDomain("segmented system: no segment covers t = " + std::to_string(t));
  }
  return static_cast<std::size_t>(std::distance(segments.begin(), it) - 1);
}

ContinuousLTISystem butterworth(int order, double fc_hz, double sigma_u, double sigma_z) {
  if (order < 1) throw InvalidInput("butterworth: order must be >= 1");
  if (!(fc_hz > 0.0) || !std::isfinite(fc_hz)) throw InvalidInput("butterworth: fc must be > 0");
  const int n = order;
  const double wc = 2.0 * std::numbers::pi * fc_hz;

  // Monic polynomial prod_k (s - p_k), coefficients in ascending order.
  std::vector<std::complex<double>> poly{1.0};
  for (int k = 1; k <= n; ++k) {
    const double angle = std::numbers::pi * (2.0 * k + n - 1) / (2.0 * n);
    const std::complex<double> p = wc * std::exp(std::complex<double>(0.0, angle));
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= p * poly[i];
    }
    poly = std::move(next);
  }

  Mat A = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) A(n - 1, j) = -poly[static_cast<std::size_t>(j)].real();
  Mat B = Mat::Zero(n, 1);
  B(n - 1, 0) = std::pow(wc, n);
  Mat C = Mat::Zero(1, n);
  C(0, 0) = 1.0;
  Vec vz(1);
  vz(0) = sigma_z * sigma_z;
  auto sys = ContinuousLTISystem::make(std::move(A), std::move(B), std::move(C), sigma_u, std::move(vz));
  return sys;
}

double transfer_magnitude(const ContinuousLTISystem& system, double f_hz, Eigen::Index input_col) {
  using C = std::complex<double>;
  if (system.output_dim() != 1) throw Unsupported("transfer_magnitude: single-output systems only");
  if (input_col < 0 || input_col >= system.input_dim()) {
    throw InvalidInput("transfer_magnitude: input column out of range");
  }
  const auto n = system.state_dim();
  // Work in the balanced coordinates D^{-1} A D, where companion forms of
  // high order or cutoff are far better conditioned.
  const Vec d = linalg::balancing_scales<double>(system.A);
  const Mat Ab = d.cwiseInverse().asDiagonal() * system.A * d.asDiagonal();
  const Vec b = d.cwiseInverse().asDiagonal() * system.B.col(input_col);
  const Mat c = system.C * d.asDiagonal();
  const CMatX<double> M = C(0.0, 2.0 * std::numbers::pi * f_hz) * CMatX<double>::Identity(n, n) - Ab.cast<C>();
  Eigen::FullPivLU<CMatX<double>> lu(M);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw FrequencyAtPole("transfer_magnitude: f coincides with a pole of the system");
  }
  const CVecX<double> x = lu.solve(b.cast<C>());
  return std::abs((c.cast<C>() * x)(0));
}

std::vector<double> regular_schedule(double fs, double duration, double t0) {
  if (!(fs > 0.0) || !(duration > 0.0)) throw InvalidInput("regular_schedule: fs and duration must be > 0");
  const auto count = static_cast<long>(std::floor(duration * fs + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, count)));
  for (long k = 1; k <= count; ++k) out.push_back(t0 + static_cast<double>(k) / fs);
  return out;
}

namespace {

std::vector<double> simulation_grid(const SegmentedSystem& system, const std::vector<double>& schedule,
                                    const SimulationOptions& options) {
  std::vector<double> grid(schedule);
  const double t_end = schedule.empty() ? options.t0 : schedule.back();
  for (const auto& seg : system.segments) {
    if (seg.t_start > options.t0 && seg.t_start < t_end) grid.push_back(seg.t_start);
  }
  std::sort(grid.begin(), grid.end());
  if (!options.dense_step) return grid;

  // Dense points closer than tol to a knot would create slivers; skip them.
  const double step = *options.dense_step;
  const double tol = 1e-9 * step;
  const std::vector<double> knots = grid;
  for (long j = 1;; ++j) {
    const double t = options.t0 + static_cast<double>(j) * step;
    if (t >= t_end - tol) break;
    auto it = std::lower_bound(knots.begin(), knots.end(), t);
    const bool near_next = it != knots.end() && *it - t < tol;
    const bool near_prev = it != knots.begin() && t - *std::prev(it) < tol;
    if (!near_next && !near_prev) grid.push_back(t);
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

}  // namespace

SimulationOutput simulate(const SegmentedSystem& system, const std::vector<double>& schedule,
                          const SimulationOptions& options) {
  system.validate(/*allow_zero_sigma_u=*/true);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (!std::isfinite(schedule[k])) throw InvalidInput("simulate: non-finite schedule time");
    if (k > 0 && !(schedule[k] > schedule[k - 1])) {
      throw InvalidInput("simulate: schedule must be strictly increasing");
    }
  }
  if (!schedule.empty() && !(schedule.front() > options.t0)) {
    throw InvalidInput("simulate: schedule must start after t0");
  }
  if (options.dense_step && !(*options.dense_step > 0.0)) {
    throw InvalidInput("simulate: dense_step must be > 0");
  }

  const auto n = system.state_dim();
  std::mt19937_64 rng(options.seed);
  const ContinuousLTISystem& first = system.at(options.t0);

  Vec x;
  if (const auto* fixed = std::get_if<FixedInitialState>(&options.initial)) {
    if (fixed->x0.size() != n) throw InvalidInput("simulate: initial state has wrong dimension");
    x = fixed->x0;
  } else {
    const Mat V0 = linalg::stationary_covariance<double>(first.A, first.B, first.sigma_u);
    x = detail::draw_gaussian(V0, rng);
  }

  SimulationOutput out;
  out.times = schedule;
  const bool dense = options.dense_step.has_value() || options.record_truth;
  if (dense) out.dense_truth.push_back({options.t0, x, first.C * x, Vec::Zero(first.input_dim())});

  const std::vector<double> grid = simulation_grid(system, schedule, options);
  double t_prev = options.t0;
  std::size_t next_knot = 0;
  for (double t : grid) {
    const ContinuousLTISystem& sys = system.at(t_prev);
    const auto m = sys.input_dim();
    const double T = t - t_prev;
    const Mat Phi = linalg::matrix_exponential<double>(sys.A, T);
    const Mat D = linalg::drift_integral<double>(sys.A, T);
    const double s2 = sys.sigma_u * sys.sigma_u;

    // Joint law of (state increment, integral of U over the step).
    Mat joint(n + m, n + m);
    joint.topLeftCorner(n, n) = s2 * linalg::forward_gramian<double>(sys.A, sys.B, T).value;
    joint.topRightCorner(n, m) = s2 * D * sys.B;
    joint.bottomLeftCorner(m, n) = joint.topRightCorner(n, m).transpose();
    joint.bottomRightCorner(m, m) = s2 * T * Mat::Identity(m, m);
    const Vec draw = detail::draw_gaussian(joint, rng);

    x = Phi * x + D * sys.h + draw.head(n);
    const Vec u_avg = draw.tail(m) / T;
    t_prev = t;

    const ContinuousLTISystem& obs_sys = system.at(t);
    if (next_knot < schedule.size() && schedule[next_knot] == t) {
      const Vec y = obs_sys.C * x;
      Vec z(y.size());
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std::sqrt(obs_sys.vz(i)) * normal(rng);
      out.knot_states.push_back(x);
      out.clean_samples.push_back(y);
      out.noisy_samples.push_back(y + z);
      ++next_knot;
    }
    if (dense) out.dense_truth.push_back({t, x, obs_sys.C * x, u_avg});
  }
  return out;
}

SimulationOutput simulate(const ContinuousLTISystem& system, const std::vector<double>& schedule,
                          const SimulationOptions& options) {
  return simulate(SegmentedSystem::single(system), schedule, options);
}

}  // namespace ctsmooth
