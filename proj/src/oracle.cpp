#include "ctsmooth/oracle.hpp"

#include <cmath>
#include <string>

namespace ctsmooth::oracle {

DiscreteDecomposition discrete_decompose(const ContinuousLTISystem& system, const std::vector<double>& meas_times,
                                         int N, double t0) {
  system.validate();
  if (N < 1) throw InvalidInput("discrete_decompose: N must be >= 1");
  DiscreteDecomposition d;
  d.N = N;
  d.t0 = t0;
  d.state_dim = system.state_dim();
  d.input_dim = system.input_dim();
  double prev = t0;
  for (double t : meas_times) {
    if (!(t > prev)) throw InvalidInput("discrete_decompose: times must be strictly increasing and after t0");
    DiscreteInterval iv;
    iv.t_begin = prev;
    iv.t_end = t;
    iv.n_sub = N;
    const double T = t - prev;
    const double h = T / N;
    iv.step = linalg::matrix_exponential<double>(system.A, h);
    iv.gain = system.B * h;
    iv.input_var = system.sigma_u * system.sigma_u * N / T;
    iv.drift = linalg::drift_integral<double>(system.A, h) * system.h;
    for (int l = 1; l <= N; ++l) d.substep_times.push_back(l == N ? t : prev + l * h);
    d.intervals.push_back(std::move(iv));
    prev = t;
  }
  return d;
}

namespace {

// Observations stacked as y = J z + offset + noise with z = (x0, u~_1..u~_L).
struct ObservationMap {
  Mat J;
  Vec offset;
  Vec y;
  Vec noise_var;
};

ObservationMap observation_map(const DiscreteDecomposition& d, const MeasurementSet& meas,
                               const ContinuousLTISystem& system, std::size_t dense_limit) {
  const auto n = d.state_dim;
  const auto m = d.input_dim;
  const auto nu = system.output_dim();
  const std::size_t K = d.intervals.size();
  if (meas.size() != K) throw InvalidInput("oracle: measurement count differs from decomposition");
  meas.validate(nu);
  for (std::size_t k = 0; k < K; ++k) {
    const double te = d.intervals[k].t_end;
    if (std::abs(meas.times[k] - te) > 1e-12 * std::max(1.0, std::abs(te))) {
      throw InvalidInput("oracle: measurement times differ from decomposition");
    }
  }
  const auto L = static_cast<Eigen::Index>(d.substeps());
  const Eigen::Index unknowns = n + L * m;
  const Eigen::Index rows = static_cast<Eigen::Index>(K) * nu;
  if (static_cast<std::size_t>(unknowns) * static_cast<std::size_t>(std::max<Eigen::Index>(rows, 1)) > dense_limit) {
    throw InvalidInput("oracle: problem exceeds the dense size guard");
  }

  ObservationMap map;
  map.J = Mat::Zero(rows, unknowns);
  map.offset = Vec::Zero(rows);
  map.y = Vec(rows);
  map.noise_var = Vec(rows);
  for (std::size_t k = 0; k < K; ++k) {
    const auto r0 = static_cast<Eigen::Index>(k) * nu;
    Mat R = system.C;
    Vec off = Vec::Zero(nu);
    for (Eigen::Index l = static_cast<Eigen::Index>((k + 1) * d.N) - 1; l >= 0; --l) {
      const DiscreteInterval& iv = d.intervals[d.interval_of(static_cast<std::size_t>(l))];
      map.J.block(r0, n + l * m, nu, m) = R * iv.gain;
      off += R * iv.drift;
      R = (R * iv.step).eval();
    }
    map.J.block(r0, 0, nu, n) = R;
    map.offset.segment(r0, nu) = off;
    map.y.segment(r0, nu) = meas.values[k];
    map.noise_var.segment(r0, nu) = meas.vz_override ? (*meas.vz_override)[k] : system.vz;
  }
  return map;
}

// Inverse of the per-entry weights of the unknowns: prior covariance for
// x0, input variance for every u~ component.
Vec input_variances(const DiscreteDecomposition& d) {
  const auto m = d.input_dim;
  Vec v(static_cast<Eigen::Index>(d.substeps()) * m);
  for (std::size_t l = 0; l < d.substeps(); ++l) {
    v.segment(static_cast<Eigen::Index>(l) * m, m).setConstant(d.intervals[d.interval_of(l)].input_var);
  }
  return v;
}

// D J^T for D = blockdiag(P, diag(input variances)).
Mat weighted_transpose(const ObservationMap& map, const Mat& P, const Vec& u_var) {
  const auto n = P.rows();
  Mat DJt(map.J.cols(), map.J.rows());
  DJt.topRows(n) = P * map.J.leftCols(n).transpose();
  DJt.bottomRows(u_var.size()) = u_var.asDiagonal() * map.J.rightCols(u_var.size()).transpose();
  return DJt;
}

JointLSSolution finalize(const DiscreteDecomposition& d, const MeasurementSet& meas, const MomentGaussian& prior,
                         const ContinuousLTISystem& system, const Vec& x0, std::vector<Vec> u) {
  JointLSSolution sol;
  sol.x0 = x0;
  sol.u = std::move(u);
  sol.x_path.reserve(d.substeps() + 1);
  sol.x_path.push_back(x0);
  Vec x = x0;
  for (std::size_t l = 0; l < d.substeps(); ++l) {
    const DiscreteInterval& iv = d.intervals[d.interval_of(l)];
    x = iv.step * x + iv.drift + iv.gain * sol.u[l];
    sol.x_path.push_back(x);
    sol.energy_term += sol.u[l].squaredNorm() / iv.input_var;
    if ((l + 1) % static_cast<std::size_t>(d.N) == 0) {
      const std::size_t k = d.interval_of(l);
      const Vec& vz = meas.vz_override ? (*meas.vz_override)[k] : system.vz;
      const Vec r = meas.values[k] - system.C * x;
      sol.misfit_term += r.dot(vz.cwiseInverse().asDiagonal() * r);
    }
  }
  const Vec dx = x0 - prior.m;
  const Mat P_pinv = prior.V.completeOrthogonalDecomposition().pseudoInverse();
  sol.prior_term = dx.dot(P_pinv * dx);
  sol.cost = sol.prior_term + sol.energy_term + sol.misfit_term;
  return sol;
}

std::vector<Vec> split_inputs(const Vec& z, const DiscreteDecomposition& d) {
  std::vector<Vec> u(d.substeps());
  for (std::size_t l = 0; l < d.substeps(); ++l) {
    u[l] = z.segment(d.state_dim + static_cast<Eigen::Index>(l) * d.input_dim, d.input_dim);
  }
  return u;
}

void check_prior(const MomentGaussian& prior, Eigen::Index n) {
  if (prior.m.size() != n || prior.V.rows() != n || prior.V.cols() != n) {
    throw InvalidInput("oracle: prior dimension mismatch");
  }
}

}  // namespace

JointLSSolution joint_ls_solve(const DiscreteDecomposition& decomp, const MeasurementSet& meas,
                               const MomentGaussian& prior, const ContinuousLTISystem& system,
                               const JointLSOptions& options) {
  system.validate();
  const auto n = decomp.state_dim;
  check_prior(prior, n);
  const ObservationMap map = observation_map(decomp, meas, system, options.dense_limit);
  const Vec u_var = input_variances(decomp);
  const Eigen::Index unknowns = map.J.cols();

  SolveRoute route = options.route;
  Eigen::LLT<Mat> prior_llt(prior.V);
  const bool prior_invertible = prior_llt.info() == Eigen::Success && n > 0 &&
                                prior_llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
  if (route == SolveRoute::automatic) {
    route = prior_invertible && static_cast<std::size_t>(unknowns) <= options.primal_limit ? SolveRoute::primal
                                                                                            : SolveRoute::dual;
  }

  Vec z_prior = Vec::Zero(unknowns);
  z_prior.head(n) = prior.m;
  Vec z;
  if (route == SolveRoute::primal) {
    if (!prior_invertible) throw InvalidInput("joint_ls_solve: primal route needs an invertible prior covariance");
    if (static_cast<std::size_t>(unknowns) > options.primal_limit) {
      throw InvalidInput("joint_ls_solve: too many unknowns for the primal route");
    }
    const Vec w_obs = map.noise_var.cwiseInverse();
    Mat H = map.J.transpose() * w_obs.asDiagonal() * map.J;
    H.topLeftCorner(n, n) += prior_llt.solve(Mat::Identity(n, n));
    H.diagonal().tail(u_var.size()) += u_var.cwiseInverse();
    Vec g = map.J.transpose() * (w_obs.asDiagonal() * (map.y - map.offset));
    g.head(n) += prior_llt.solve(prior.m);
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError("joint_ls_solve: singular normal matrix (improper prior or unobservable directions)");
    }
    z = llt.solve(g);
  } else {
    const Mat DJt = weighted_transpose(map, prior.V, u_var);
    Mat S = map.J * DJt;
    S.diagonal() += map.noise_var;
    const Vec innovation = map.y - map.offset - map.J * z_prior;
    Eigen::LDLT<Mat> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw ConditioningError("joint_ls_solve: singular innovation matrix");
    z = z_prior + DJt * ldlt.solve(innovation);
  }

  JointLSSolution sol = finalize(decomp, meas, prior, system, z.head(n), split_inputs(z, decomp));
  sol.route = route;
  return sol;
}

double cost_of(const DiscreteDecomposition& decomp, const MeasurementSet& meas, const std::vector<Vec>& u,
               const MomentGaussian& prior, const ContinuousLTISystem& system) {
  system.validate();
  const auto n = decomp.state_dim;
  const auto m = decomp.input_dim;
  check_prior(prior, n);
  if (u.size() != decomp.substeps()) throw InvalidInput("cost_of: candidate length differs from decomposition");
  for (const Vec& v : u) {
    if (v.size() != m) throw InvalidInput("cost_of: candidate input has wrong dimension");
  }
  const ObservationMap map = observation_map(decomp, meas, system, JointLSOptions{}.dense_limit);
  Vec u_stacked(static_cast<Eigen::Index>(u.size()) * m);
  for (std::size_t l = 0; l < u.size(); ++l) u_stacked.segment(static_cast<Eigen::Index>(l) * m, m) = u[l];

  // Optimal x0 for this input path.
  const Mat Jx = map.J.leftCols(n);
  const Vec r = map.y - map.offset - map.J.rightCols(u_stacked.size()) * u_stacked;
  Mat S = Jx * prior.V * Jx.transpose();
  S.diagonal() += map.noise_var;
  const Vec x0 = prior.m + prior.V * Jx.transpose() * S.ldlt().solve(r - Jx * prior.m);
  return finalize(decomp, meas, prior, system, x0, u).cost;
}

std::vector<Mat> input_posterior_precision(const DiscreteDecomposition& decomp, const MeasurementSet& meas,
                                           const MomentGaussian& prior, const ContinuousLTISystem& system) {
  system.validate();
  const auto n = decomp.state_dim;
  const auto m = decomp.input_dim;
  check_prior(prior, n);
  const ObservationMap map = observation_map(decomp, meas, system, JointLSOptions{}.dense_limit);
  const Vec u_var = input_variances(decomp);
  const Mat DJt = weighted_transpose(map, prior.V, u_var);
  Mat S = map.J * DJt;
  S.diagonal() += map.noise_var;
  Eigen::LDLT<Mat> ldlt(S);

  std::vector<Mat> out(decomp.substeps());
  for (std::size_t l = 0; l < decomp.substeps(); ++l) {
    const Eigen::Index row = n + static_cast<Eigen::Index>(l) * m;
    const Mat G = DJt.middleRows(row, m);
    Mat cov = u_var.segment(static_cast<Eigen::Index>(l) * m, m).asDiagonal();
    cov -= G * ldlt.solve(G.transpose());
    out[l] = cov.inverse();
  }
  return out;
}

Mat quadrature_gramian(const Mat& A, const Mat& B, double t, int steps) {
  if (steps < 2 || steps % 2 != 0) throw InvalidInput("quadrature_gramian: steps must be even and >= 2");
  if (!(t >= 0.0)) throw InvalidInput("quadrature_gramian: t must be >= 0");
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw InvalidInput("quadrature_gramian: dimension mismatch");
  const double h = t / steps;
  const Mat BBt = B * B.transpose();
  Mat sum = Mat::Zero(A.rows(), A.rows());
  for (int i = 0; i <= steps; ++i) {
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const Mat E = linalg::matrix_exponential<double>(A, i * h);
    sum += w * E * BBt * E.transpose();
  }
  return linalg::symmetrized(Mat(sum * (h / 3.0)));
}

}  // namespace ctsmooth::oracle
