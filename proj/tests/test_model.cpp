#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ctsmooth/analysis.hpp"
#include "ctsmooth/model.hpp"

using namespace ctsmooth;

namespace {

ContinuousLTISystem scalar(double a, double sigma_u = 1.0, double sigma_z = 1.0) {
  return ContinuousLTISystem::make(Mat::Constant(1, 1, a), Mat::Ones(1, 1), Mat::Ones(1, 1), sigma_u,
                                   Vec::Constant(1, sigma_z * sigma_z));
}

}  // namespace

TEST_CASE("first-order Butterworth is 1/(s+1) at unit angular cutoff") {
  const auto s = butterworth(1, 1.0 / (2 * std::numbers::pi), 1.0, 1.0);
  CHECK(s.A(0, 0) == doctest::Approx(-1.0));
  CHECK(s.B(0, 0) == doctest::Approx(1.0));
  CHECK(s.C(0, 0) == 1.0);
  CHECK(transfer_magnitude(s, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("Butterworth magnitude identity") {
  CHECK(transfer_magnitude(butterworth(4, 1.0, 1, 1), 1.0) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(transfer_magnitude(butterworth(4, 1.0, 1, 1), 4.0) ==
        doctest::Approx(1 / std::sqrt(1 + std::pow(4.0, 8))).epsilon(1e-9));
  for (double f : {0.5, 1.0, 2.0}) {
    const double h = transfer_magnitude(butterworth(6, 1.0, 1, 1), f);
    CHECK(h * h == doctest::Approx(1 / (1 + std::pow(f, 12))).epsilon(1e-9));
  }
  for (int n = 1; n <= 8; ++n) {
    for (double fc : {0.1, 1.0, 100.0}) {
      const auto s = butterworth(n, fc, 1, 1);
      for (double r = 0.1; r <= 10.0; r *= 1.37) {
        const double h = transfer_magnitude(s, r * fc);
        CHECK(h * h == doctest::Approx(1 / (1 + std::pow(r, 2 * n))).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("Butterworth filters are stable up to order 12") {
  for (int n = 1; n <= 12; ++n) {
    CHECK(linalg::is_hurwitz<double>(butterworth(n, 1.0, 1, 1).A));
  }
  CHECK_THROWS_AS(butterworth(0, 1.0, 1, 1), InvalidInput);
  CHECK_THROWS_AS(butterworth(3, -1.0, 1, 1), InvalidInput);
}

TEST_CASE("transfer magnitude at a pole") {
  Mat A(2, 2);
  A << 0, 1, -1, 0;  // poles at +-j, i.e. f = 1/(2 pi)
  auto s = ContinuousLTISystem::make(A, Mat::Identity(2, 1), Mat::Identity(1, 2), 1, Vec::Ones(1));
  CHECK_THROWS_AS(transfer_magnitude(s, 1 / (2 * std::numbers::pi)), FrequencyAtPole);
  auto multi = ContinuousLTISystem::make(A, Mat::Identity(2, 1), Mat::Identity(2, 2), 1, Vec::Ones(2));
  CHECK_THROWS_AS(transfer_magnitude(multi, 1.0), Unsupported);
}

TEST_CASE("system validation") {
  auto s = scalar(-1);
  CHECK_NOTHROW(s.validate());
  s.vz(0) = 0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = scalar(-1);
  s.sigma_u = 0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  CHECK_NOTHROW(s.validate(true));
  s = scalar(-1);
  s.B = Mat::Ones(2, 1);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
}

TEST_CASE("regular schedule") {
  const auto t = regular_schedule(10.0, 5.0);
  REQUIRE(t.size() == 50);
  CHECK(t.front() == doctest::Approx(0.1));
  CHECK(t.back() == doctest::Approx(5.0));
}

TEST_CASE("noise-free simulation follows the flow") {
  const auto sys = butterworth(3, 1.0, 0.0, 0.1);
  Vec x0(3);
  x0 << 1.0, -2.0, 0.5;
  SimulationOptions opt;
  opt.initial = FixedInitialState{x0};
  opt.seed = 4;
  const auto sched = regular_schedule(7.0, 2.0);
  const auto out = simulate(sys, sched, opt);
  for (std::size_t k = 0; k < sched.size(); ++k) {
    const Vec expected = linalg::matrix_exponential<double>(sys.A, sched[k]) * x0;
    CHECK((out.knot_states[k] - expected).norm() < 1e-9 * std::max(1.0, expected.norm()));
  }
}

TEST_CASE("offset drives the mean") {
  auto sys = scalar(-1.0, 0.0);
  sys.h = Vec::Constant(1, 3.0);
  SimulationOptions opt;
  opt.initial = FixedInitialState{Vec::Zero(1)};
  const auto out = simulate(sys, {1.0}, opt);
  CHECK(out.knot_states[0](0) == doctest::Approx(3 * (1 - std::exp(-1.0))).epsilon(1e-13));
}

TEST_CASE("integrator increments have variance sigma_u^2 T") {
  auto sys = scalar(0.0, 1.0);
  SimulationOptions opt;
  opt.initial = FixedInitialState{Vec::Zero(1)};
  opt.seed = 99;
  const int K = 10000;
  std::vector<double> sched(K);
  for (int k = 0; k < K; ++k) sched[k] = k + 1.0;
  const auto out = simulate(sys, sched, opt);
  double sum = 0, sum2 = 0;
  double prev = 0;
  for (int k = 0; k < K; ++k) {
    const double d = out.knot_states[k](0) - prev;
    prev = out.knot_states[k](0);
    sum += d;
    sum2 += d * d;
  }
  const double var = sum2 / K - (sum / K) * (sum / K);
  // standard error of a sample variance of unit-variance normals is sqrt(2/K)
  CHECK(std::abs(var - 1.0) < 3 * std::sqrt(2.0 / K));
}

TEST_CASE("dense truth records consistent input averages") {
  auto sys = scalar(0.0, 2.0);
  SimulationOptions opt;
  opt.initial = FixedInitialState{Vec::Zero(1)};
  opt.dense_step = 0.01;
  opt.seed = 5;
  const auto out = simulate(sys, {0.25, 0.5, 1.0}, opt);
  REQUIRE(out.dense_truth.size() == 101);
  for (std::size_t i = 1; i < out.dense_truth.size(); ++i) {
    const auto& a = out.dense_truth[i - 1];
    const auto& b = out.dense_truth[i];
    CHECK(b.x(0) - a.x(0) == doctest::Approx(b.u_avg(0) * (b.t - a.t)).epsilon(1e-9));
  }
  // knots are hit exactly
  CHECK(out.dense_truth[25].t == 0.25);
  CHECK(out.dense_truth.back().t == 1.0);
  CHECK(out.knot_states[2](0) == out.dense_truth.back().x(0));
}

TEST_CASE("simulation is deterministic given the seed") {
  const auto sys = butterworth(4, 1.0, 1.0, 0.2);
  SimulationOptions opt;
  opt.seed = 17;
  const auto sched = regular_schedule(10, 3);
  const auto a = simulate(sys, sched, opt);
  const auto b = simulate(sys, sched, opt);
  for (std::size_t k = 0; k < sched.size(); ++k) {
    CHECK(a.noisy_samples[k] == b.noisy_samples[k]);
    CHECK(a.knot_states[k] == b.knot_states[k]);
  }
  opt.seed = 18;
  const auto c = simulate(sys, sched, opt);
  CHECK(c.noisy_samples[0] != a.noisy_samples[0]);
}

TEST_CASE("simulation input errors") {
  const auto sys = scalar(-1);
  SimulationOptions opt;
  CHECK_THROWS_AS(simulate(sys, {1.0, 0.5}, opt), InvalidInput);
  CHECK_THROWS_AS(simulate(sys, {0.0}, opt), InvalidInput);
  opt.dense_step = 0.0;
  CHECK_THROWS_AS(simulate(sys, {1.0}, opt), InvalidInput);
}

TEST_CASE("segmented systems switch dynamics at segment starts") {
  SegmentedSystem seg;
  auto a = scalar(0.0, 0.0);
  a.h = Vec::Constant(1, 1.0);
  auto b = scalar(0.0, 0.0);
  b.h = Vec::Constant(1, -2.0);
  seg.segments = {{0.0, a}, {1.0, b}};
  SimulationOptions opt;
  opt.initial = FixedInitialState{Vec::Zero(1)};
  const auto out = simulate(seg, {0.5, 1.5}, opt);
  CHECK(out.knot_states[0](0) == doctest::Approx(0.5));
  CHECK(out.knot_states[1](0) == doctest::Approx(1.0 - 1.0));
  CHECK(seg.segment_at(0.99) == 0);
  CHECK(seg.segment_at(1.0) == 1);
  CHECK_THROWS_AS(seg.segment_at(-0.1), OutOfDomain);
}

TEST_CASE("stationary initial state has the stationary variance") {
  const auto sys = scalar(-1.0, 1.0);
  double sum2 = 0;
  const int trials = 4000;
  for (int s = 0; s < trials; ++s) {
    SimulationOptions opt;
    opt.seed = static_cast<std::uint64_t>(s);
    opt.record_truth = true;
    const auto out = simulate(sys, {1.0}, opt);
    sum2 += out.dense_truth.front().x(0) * out.dense_truth.front().x(0);
  }
  CHECK(std::abs(sum2 / trials - 0.5) < 3 * 0.5 * std::sqrt(2.0 / trials));
}
