#include "ctsmooth/analysis.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "ctsmooth/smoother.hpp"

namespace ctsmooth::analysis {

Mat stationary_state_cov(const ContinuousLTISystem& system) {
  system.validate();
  return linalg::stationary_covariance<double>(system.A, system.B, system.sigma_u);
}

SnrReport snr(const ContinuousLTISystem& system, std::optional<double> fc_hz) {
  system.validate();
  if (system.output_dim() != 1) throw Unsupported("snr: only single-output systems are supported");
  const Mat V = stationary_state_cov(system);
  SnrReport r;
  r.ey2 = (system.C * V * system.C.transpose())(0, 0);
  const double sz2 = system.vz(0);
  r.snr_linear = r.ey2 / sz2;
  r.snr_db = 10.0 * std::log10(r.snr_linear);
  if (fc_hz) {
    if (!(*fc_hz > 0.0)) throw InvalidInput("snr: fc must be > 0");
    r.snr_constant = r.snr_linear * sz2 / (system.sigma_u * system.sigma_u * *fc_hz);
  }
  return r;
}

ContinuousLTISystem with_snr_db(const ContinuousLTISystem& system, double snr_db) {
  const double ey2 = snr(system).ey2;
  ContinuousLTISystem out = system;
  out.vz(0) = ey2 / std::pow(10.0, snr_db / 10.0);
  return out;
}

namespace {

std::uint64_t trial_seed(std::uint64_t seed, std::size_t cell, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(trial)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

struct TrialError {
  double sum_sq = 0.0;
  std::size_t count = 0;
};

TrialError run_trial(const ContinuousLTISystem& sys, double fs, const ErrorCurveOptions& opt, std::uint64_t seed) {
  const int K = opt.horizon_samples;
  std::vector<double> schedule(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) schedule[static_cast<std::size_t>(k)] = (k + 1) / fs;

  SimulationOptions so;
  so.seed = seed;
  const SimulationOutput sim = simulate(sys, schedule, so);
  MeasurementSet meas{schedule, sim.noisy_samples, std::nullopt};
  const SmootherState state = run(sys, meas, default_prior(sys), 0.0);

  const auto guard = static_cast<int>(std::floor(opt.edge_guard * K));
  TrialError e;
  for (int k = guard; k < K - guard; ++k) {
    const auto& knot = state.knots[static_cast<std::size_t>(k) + 1];
    const Vec x = combine(knot.fwd_post, knot.bwd_pre).m;
    const double err = (sys.C * x - sim.clean_samples[static_cast<std::size_t>(k)])(0);
    e.sum_sq += err * err;
    ++e.count;
  }
  return e;
}

}  // namespace

std::vector<ErrorCurveCell> output_error_curve(const ContinuousLTISystem& system, double fc_hz,
                                               const ErrorCurveOptions& options) {
  system.validate();
  if (options.trials < 1) throw InvalidInput("output_error_curve: trials must be >= 1");
  if (options.horizon_samples < 3) throw InvalidInput("output_error_curve: horizon too short");
  if (!(options.edge_guard >= 0.0 && options.edge_guard < 0.5)) {
    throw InvalidInput("output_error_curve: edge guard must lie in [0, 0.5)");
  }
  if (!(fc_hz > 0.0)) throw InvalidInput("output_error_curve: fc must be > 0");

  struct Job {
    std::size_t cell;
    std::size_t trial;
  };
  std::vector<ErrorCurveCell> cells;
  std::vector<ContinuousLTISystem> cell_systems;
  std::vector<double> cell_ey2;
  for (double r : options.fs_over_fc) {
    if (!(r > 0.0)) throw InvalidInput("output_error_curve: fs/fc must be > 0");
    for (double s : options.snr_db) {
      cells.push_back({r, s, 0.0, 0.0});
      cell_systems.push_back(with_snr_db(system, s));
      cell_ey2.push_back(snr(cell_systems.back()).ey2);
    }
  }
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int t = 0; t < options.trials; ++t) jobs.push_back({c, static_cast<std::size_t>(t)});
  }

  std::vector<TrialError> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      results[j] = run_trial(cell_systems[job.cell], cells[job.cell].fs_over_fc * fc_hz, options,
                             trial_seed(options.seed, job.cell, job.trial));
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  // Sum in job order so the result is independent of scheduling.
  std::vector<TrialError> per_cell(cells.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    per_cell[jobs[j].cell].sum_sq += results[j].sum_sq;
    per_cell[jobs[j].cell].count += results[j].count;
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cells[c].snr_out_inv = per_cell[c].sum_sq / static_cast<double>(per_cell[c].count) / cell_ey2[c];
    cells[c].snr_out_inv_db = 10.0 * std::log10(cells[c].snr_out_inv);
  }
  return cells;
}

double oversampling_slope(const std::vector<ErrorCurveCell>& cells, double snr_db) {
  std::vector<double> xs, ys;
  for (const auto& c : cells) {
    if (c.snr_db == snr_db) {
      xs.push_back(std::log2(c.fs_over_fc));
      ys.push_back(c.snr_out_inv_db);
    }
  }
  if (xs.size() < 2) throw InvalidInput("oversampling_slope: need at least two sampling rates");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace ctsmooth::analysis
