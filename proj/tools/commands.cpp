#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>

#include "csv.hpp"
#include "ctsmooth/analysis.hpp"
#include "ctsmooth/oracle.hpp"

namespace ctsmooth::cli {

namespace {

// Checks that fail set this exit code; everything else maps by exception type.
constexpr int kCheckFailed = 3;

std::vector<std::string> numbered(const std::string& base, Eigen::Index count) {
  if (count == 1) return {base};
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= count; ++i) out.push_back(base + "_" + std::to_string(i));
  return out;
}

void append(std::vector<double>& row, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
}

void emit(const std::string& path, std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
          const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  if (path.empty() || path == "-") {
    write_csv(out, meta, header, rows);
  } else {
    write_csv_file(path, meta, header, rows);
  }
}

std::vector<double> read_times(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  std::vector<double> times = t.column_values("t");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw DataError(path + " row " + std::to_string(i + 1) + ": times must be strictly increasing");
    }
  }
  if (times.empty()) throw DataError(path + ": no times");
  return times;
}

struct Samples {
  MeasurementSet meas;
  double t0 = 0.0;
};

Samples read_samples(const std::string& path, Eigen::Index nu) {
  const CsvTable t = read_csv_file(path);
  const std::size_t tc = t.column("t");
  std::vector<std::size_t> yc;
  for (const auto& name : numbered("y_tilde", nu)) yc.push_back(t.column(name));
  Samples s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double time = t.rows[r][tc];
    if (!s.meas.times.empty() && !(time > s.meas.times.back())) {
      throw DataError(path + " row " + std::to_string(r + 1) + ": times must be strictly increasing");
    }
    Vec y(nu);
    for (Eigen::Index i = 0; i < nu; ++i) y(i) = t.rows[r][yc[static_cast<std::size_t>(i)]];
    s.meas.times.push_back(time);
    s.meas.values.push_back(y);
  }
  if (s.meas.times.empty()) throw DataError(path + ": no samples");
  if (auto it = t.meta.find("t0"); it != t.meta.end()) {
    try {
      std::size_t used = 0;
      s.t0 = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(path + ": bad t0 metadata '" + it->second + "'");
    }
  }
  if (!(s.meas.times.front() > s.t0)) throw DataError(path + ": samples must lie after t0");
  return s;
}

std::optional<double> required_cutoff(const ModelConfig& cfg, const char* what) {
  if (!cfg.cutoff_hz()) throw DataError(std::string(what) + ": the model config must declare fc_hz");
  return cfg.cutoff_hz();
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string model, out, truth, times;
  std::optional<double> fs, duration, grid_step;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const ModelConfig cfg = load_config(a.model);
  const ContinuousLTISystem sys = cfg.system();

  std::vector<double> schedule;
  if (!a.times.empty()) {
    if (a.fs || a.duration) throw UsageError("simulate: give either --times or --fs/--duration");
    schedule = read_times(a.times);
    if (!(schedule.front() > 0.0)) throw DataError("simulate: times must be > 0 (t0 = 0)");
  } else {
    if (!a.fs || !a.duration) throw UsageError("simulate: needs --fs and --duration, or --times");
    if (!(*a.fs > 0.0) || !(*a.duration > 0.0)) throw UsageError("simulate: --fs and --duration must be > 0");
    schedule = regular_schedule(*a.fs, *a.duration);
    if (schedule.empty()) throw UsageError("simulate: duration shorter than one sample period");
  }

  SimulationOptions so;
  so.seed = a.seed;
  if (!cfg.prior_var && linalg::is_hurwitz<double>(sys.A)) {
    so.initial = StationaryInitialState{};
  } else {
    so.initial = FixedInitialState{Vec::Zero(sys.state_dim())};
  }
  if (!a.truth.empty()) {
    so.record_truth = true;
    if (a.grid_step) {
      if (!(*a.grid_step > 0.0)) throw UsageError("simulate: --grid-step must be > 0");
      so.dense_step = *a.grid_step;
    }
  }
  const SimulationOutput sim = simulate(sys, schedule, so);

  const std::vector<std::pair<std::string, std::string>> meta{
      {"seed", std::to_string(a.seed)}, {"config_hash", hash_hex(cfg.hash)}, {"t0", format_number(0.0)}};
  std::vector<std::string> header{"t"};
  for (const auto& h : numbered("y_tilde", sys.output_dim())) header.push_back(h);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < sim.times.size(); ++k) {
    std::vector<double> row{sim.times[k]};
    append(row, sim.noisy_samples[k]);
    rows.push_back(std::move(row));
  }
  emit(a.out, out, meta, header, rows);

  if (!a.truth.empty()) {
    std::vector<std::string> th{"t"};
    for (const auto& h : numbered("x", sys.state_dim())) th.push_back(h);
    for (const auto& h : numbered("y", sys.output_dim())) th.push_back(h);
    for (const auto& h : numbered("u_avg", sys.input_dim())) th.push_back(h);
    std::vector<std::vector<double>> trows;
    for (const auto& r : sim.dense_truth) {
      std::vector<double> row{r.t};
      append(row, r.x);
      append(row, r.y);
      append(row, r.u_avg);
      trows.push_back(std::move(row));
    }
    write_csv_file(a.truth, meta, th, trows);
  }
  return 0;
}

// ---- estimate -------------------------------------------------------------

struct EstimateArgs {
  std::string model, samples, out;
  std::optional<double> grid_step, assumed_snr_db;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const ModelConfig cfg = load_config(a.model);
  ContinuousLTISystem sys = cfg.system();
  const Samples s = read_samples(a.samples, sys.output_dim());

  const std::optional<double> assumed = a.assumed_snr_db ? a.assumed_snr_db : cfg.assumed_snr_db;
  if (assumed) sys = with_assumed_snr(sys, *assumed);
  const MomentGaussian prior = config_prior(cfg, sys);
  const SmootherState state = run(sys, s.meas, prior, s.t0);

  // Grid t0 + j step, with points that coincide with a sample time up to
  // round-off snapped onto it.
  std::vector<double> grid;
  if (a.grid_step) {
    const double step = *a.grid_step;
    if (!(step > 0.0)) throw UsageError("estimate: --grid-step must be > 0");
    const double tol = 1e-9 * step;
    const auto& times = s.meas.times;
    for (long long j = 0;; ++j) {
      double t = s.t0 + static_cast<double>(j) * step;
      if (t > state.t_end + tol) break;
      auto it = std::lower_bound(times.begin(), times.end(), t - tol);
      if (it != times.end() && std::abs(*it - t) <= tol) t = *it;
      t = std::min(t, state.t_end);
      if (grid.empty() || t > grid.back()) grid.push_back(t);
    }
  } else {
    grid = s.meas.times;
  }
  const std::vector<EstimateRecord> est = query_grid(state, grid);

  std::vector<std::string> header{"t"};
  for (const auto& h : numbered("y_hat", sys.output_dim())) header.push_back(h);
  for (const auto& h : numbered("y_std", sys.output_dim())) header.push_back(h);
  for (const auto& h : numbered("u_hat", sys.input_dim())) header.push_back(h);
  for (Eigen::Index i = 1; i <= sys.state_dim(); ++i) header.push_back("x_mean_" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (const auto& r : est) {
    std::vector<double> row{r.t};
    append(row, r.y_hat);
    append(row, r.y_var.diagonal().cwiseMax(0.0).cwiseSqrt());
    append(row, r.u_hat);
    append(row, r.x_mean);
    rows.push_back(std::move(row));
  }
  std::vector<std::pair<std::string, std::string>> meta{{"config_hash", hash_hex(cfg.hash)},
                                                        {"samples", a.samples}};
  if (assumed) meta.emplace_back("assumed_snr_db", format_number(*assumed));
  emit(a.out, out, meta, header, rows);
  return 0;
}

// ---- snr ------------------------------------------------------------------

int cmd_snr(const std::string& model, std::ostream& out) {
  const ModelConfig cfg = load_config(model);
  const analysis::SnrReport r = analysis::snr(cfg.system(), cfg.cutoff_hz());
  out << "ey2 = " << format_number(r.ey2) << '\n'
      << "snr = " << format_number(r.snr_linear) << '\n'
      << "snr_db = " << format_number(r.snr_db) << '\n';
  if (r.snr_constant) out << "snr_constant = " << format_number(*r.snr_constant) << '\n';
  return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  std::string model, out;
  std::vector<double> oversampling{8, 16, 32, 64};
  std::vector<double> snr_db{30};
  int trials = 50;
  int horizon = 500;
  std::uint64_t seed = 1;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const ModelConfig cfg = load_config(a.model);
  const double fc = *required_cutoff(cfg, "sweep");
  analysis::ErrorCurveOptions opt;
  opt.fs_over_fc = a.oversampling;
  opt.snr_db = a.snr_db;
  opt.trials = a.trials;
  opt.horizon_samples = a.horizon;
  opt.seed = a.seed;
  const auto cells = analysis::output_error_curve(cfg.system(), fc, opt);

  std::vector<std::vector<double>> rows;
  for (const auto& c : cells) rows.push_back({c.fs_over_fc, c.snr_db, c.snr_out_inv_db});
  emit(a.out, out,
       {{"seed", std::to_string(a.seed)},
        {"config_hash", hash_hex(cfg.hash)},
        {"trials", std::to_string(a.trials)},
        {"horizon", std::to_string(a.horizon)}},
       {"fs_over_fc", "snr_db", "snr_out_inv_db"}, rows);
  if (!a.out.empty() && a.out != "-" && a.oversampling.size() >= 2) {
    for (double s : a.snr_db) {
      out << "slope_db_per_doubling[snr_db=" << format_number(s)
          << "] = " << format_number(analysis::oversampling_slope(cells, s)) << '\n';
    }
  }
  return 0;
}

// ---- oracle-check ---------------------------------------------------------

struct OracleArgs {
  std::string model, samples;
  std::vector<int> substeps{64, 128, 256, 512, 1024, 2048, 4096};
  std::optional<double> fs;
  int count = 10;
  std::uint64_t seed = 1;
  double sigma_scale = 1.0;
};

int cmd_oracle_check(const OracleArgs& a, std::ostream& out) {
  const ModelConfig cfg = load_config(a.model);
  const ContinuousLTISystem sys = cfg.system();
  OracleCheckInput in;
  in.system = sys;
  in.prior = config_prior(cfg, sys);
  in.substeps = a.substeps;
  in.oracle_sigma_scale = a.sigma_scale;
  if (!a.samples.empty()) {
    Samples s = read_samples(a.samples, sys.output_dim());
    in.meas = std::move(s.meas);
    in.t0 = s.t0;
  } else {
    if (a.count < 1) throw UsageError("oracle-check: --count must be >= 1");
    const double fs = a.fs ? *a.fs : 10.0 * cfg.cutoff_hz().value_or(0.1);
    if (!(fs > 0.0)) throw UsageError("oracle-check: --fs must be > 0");
    std::vector<double> schedule;
    for (int k = 1; k <= a.count; ++k) schedule.push_back(k / fs);
    SimulationOptions so;
    so.seed = a.seed;
    so.initial = FixedInitialState{in.prior.m};
    const SimulationOutput sim = simulate(sys, schedule, so);
    in.meas = MeasurementSet{schedule, sim.noisy_samples, std::nullopt};
  }
  const OracleCheckReport r = oracle_check(in);
  out << "N,u_rel_error,x_rel_error\n";
  for (const auto& row : r.rows) {
    out << row.N << ',' << format_number(row.u_error) << ',' << format_number(row.x_error) << '\n';
  }
  out << "slope = " << format_number(r.slope) << '\n';
  if (r.exact) out << "errors at round-off level for every N\n";
  out << (r.passed ? "PASS" : "FAIL") << '\n';
  return r.passed ? 0 : kCheckFailed;
}

}  // namespace

MomentGaussian config_prior(const ModelConfig& cfg, const ContinuousLTISystem& system) {
  if (cfg.prior_var) {
    const auto n = system.state_dim();
    return MomentGaussian{Vec::Zero(n), Mat::Identity(n, n) * *cfg.prior_var};
  }
  if (!linalg::is_hurwitz<double>(system.A)) {
    throw DataError("model is not stable; set prior_var in the config");
  }
  return default_prior(system);
}

ContinuousLTISystem with_assumed_snr(const ContinuousLTISystem& system, double assumed_snr_db) {
  const double true_db = analysis::snr(system).snr_db;
  ContinuousLTISystem out = system;
  out.sigma_u = system.sigma_u * std::sqrt(std::pow(10.0, (assumed_snr_db - true_db) / 10.0));
  return out;
}

OracleCheckReport oracle_check(const OracleCheckInput& input) {
  if (input.substeps.size() < 2) throw InvalidInput("oracle_check: need at least two values of N");
  std::vector<int> Ns = input.substeps;
  std::sort(Ns.begin(), Ns.end());
  const int M = Ns.front();
  for (int N : Ns) {
    if (N < 1 || N % M != 0) throw InvalidInput("oracle_check: every N must be a multiple of the smallest");
  }
  if (!(input.oracle_sigma_scale > 0.0)) throw InvalidInput("oracle_check: sigma scale must be > 0");

  const SmootherState state = run(input.system, input.meas, input.prior, input.t0);
  const oracle::DiscreteDecomposition coarse = oracle::discrete_decompose(input.system, input.meas.times, M, input.t0);
  const std::vector<EstimateRecord> est = query_grid(state, coarse.substep_times);
  double u_norm2 = 0.0, x_norm2 = 0.0;
  for (const auto& e : est) {
    u_norm2 += e.u_hat.squaredNorm();
    x_norm2 += e.x_mean.squaredNorm();
  }
  const double u_scale = std::sqrt(std::max(u_norm2, 1e-300));
  const double x_scale = std::sqrt(std::max(x_norm2, 1e-300));

  ContinuousLTISystem oracle_sys = input.system;
  oracle_sys.sigma_u *= input.oracle_sigma_scale;

  OracleCheckReport report;
  std::vector<double> lx, ly;
  for (int N : Ns) {
    const auto d = oracle::discrete_decompose(oracle_sys, input.meas.times, N, input.t0);
    const auto sol = oracle::joint_ls_solve(d, input.meas, input.prior, oracle_sys);
    const std::size_t stride = static_cast<std::size_t>(N / M);
    OracleCheckRow row;
    row.N = N;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const std::size_t l = (i + 1) * stride - 1;
      row.u_error += (sol.u[l] - est[i].u_hat).squaredNorm();
      row.x_error += (sol.x_path[l + 1] - est[i].x_mean).squaredNorm();
    }
    row.u_error = std::sqrt(row.u_error) / u_scale;
    row.x_error = std::sqrt(row.x_error) / x_scale;
    report.rows.push_back(row);
    lx.push_back(std::log(static_cast<double>(N)));
    ly.push_back(std::log(std::max(row.u_error, 1e-300)));
  }
  report.slope = fit_slope(lx, ly);
  report.exact = std::all_of(report.rows.begin(), report.rows.end(),
                             [](const OracleCheckRow& r) { return r.u_error < 1e-9 && r.x_error < 1e-9; });
  const OracleCheckRow& last = report.rows.back();
  report.passed = report.exact || (report.slope >= -1.2 && report.slope <= -0.8 && last.u_error <= 1e-3 &&
                                   last.x_error <= 1e-3);
  return report;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous-time LMMSE smoothing and interpolation", "ctsmooth"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Draw a sample path and noisy samples from a model");
  sim->add_option("--model", sa.model, "Model config")->required();
  sim->add_option("--out", sa.out, "Samples CSV (stdout if omitted)");
  sim->add_option("--truth", sa.truth, "Truth CSV (states, clean output, input averages)");
  sim->add_option("--fs", sa.fs, "Sampling rate in Hz");
  sim->add_option("--duration", sa.duration, "Record length in seconds");
  sim->add_option("--times", sa.times, "CSV with a 't' column of sample times");
  sim->add_option("--grid-step", sa.grid_step, "Truth resolution in seconds");
  sim->add_option("--seed", sa.seed, "RNG seed");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Smooth samples and evaluate the posterior on a grid");
  est->add_option("--model", ea.model, "Model config")->required();
  est->add_option("--samples", ea.samples, "Samples CSV")->required();
  est->add_option("--out", ea.out, "Estimates CSV (stdout if omitted)");
  est->add_option("--grid-step", ea.grid_step, "Output grid spacing (sample times if omitted)");
  est->add_option("--assumed-snr-db", ea.assumed_snr_db, "SNR assumed by the estimator");

  std::string snr_model;
  auto* snr = app.add_subcommand("snr", "Report the observation SNR of a model");
  snr->add_option("--model", snr_model, "Model config")->required();

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo output error against oversampling");
  sweep->add_option("--model", wa.model, "Model config (must declare fc_hz)")->required();
  sweep->add_option("--out", wa.out, "Result CSV (stdout if omitted)");
  sweep->add_option("--oversampling", wa.oversampling, "fs/fc values")->delimiter(',');
  sweep->add_option("--snr-db", wa.snr_db, "Input SNR values in dB")->delimiter(',');
  sweep->add_option("--trials", wa.trials, "Trials per cell");
  sweep->add_option("--horizon", wa.horizon, "Samples per trial");
  sweep->add_option("--seed", wa.seed, "RNG seed");

  OracleArgs oa;
  auto* orc = app.add_subcommand("oracle-check", "Compare the smoother with the discrete least-squares solution");
  orc->add_option("--model", oa.model, "Model config")->required();
  orc->add_option("--samples", oa.samples, "Samples CSV (simulated if omitted)");
  orc->add_option("--substeps", oa.substeps, "Substep counts N")->delimiter(',');
  orc->add_option("--fs", oa.fs, "Sampling rate of simulated samples");
  orc->add_option("--count", oa.count, "Number of simulated samples");
  orc->add_option("--seed", oa.seed, "RNG seed");
  orc->add_option("--oracle-sigma-scale", oa.sigma_scale, "Scale sigma_u in the oracle only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sa, out);
    if (est->parsed()) return cmd_estimate(ea, out);
    if (snr->parsed()) return cmd_snr(snr_model, out);
    if (sweep->parsed()) return cmd_sweep(wa, out);
    if (orc->parsed()) return cmd_oracle_check(oa, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace ctsmooth::cli
