#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "ctsmooth/analysis.hpp"

using namespace ctsmooth;
using namespace ctsmooth::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ctsmooth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("ctsmooth_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content = {}) const {
    const auto p = (path / name).string();
    if (!content.empty()) std::ofstream(p) << content;
    return p;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kBw6 = "kind = butterworth\norder = 6\nfc_hz = 1\nsigma_u = 1\nsigma_z = 0.45\n";
const char* kScalar =
    "# first-order lowpass\nkind = explicit\nmatrix = A\nrow = -1\nmatrix = B\nrow = 1\nmatrix = C\nrow = 1\n"
    "sigma_u = 1\nsigma_z = 1\n";
const char* kIntegrator =
    "kind = explicit\nmatrix = A\nrow = 0\nmatrix = B\nrow = 1\nmatrix = C\nrow = 1\nsigma_u = 1\nsigma_z = 1\n"
    "prior_var = 0\n";

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream bw("kind = butterworth  # builtin\norder = 4\nfc_hz = 2\nsigma_u = 1\nsigma_z = 0.1\n");
  const auto cfg = parse_config(bw);
  REQUIRE(cfg.builtin);
  CHECK(cfg.builtin->order == 4);
  CHECK(cfg.system().state_dim() == 4);
  CHECK(cfg.cutoff_hz() == 2.0);

  std::istringstream ex(
      "kind = explicit\nmatrix = A\nrow = -1 0\nrow = 1 -2\nmatrix = B\nrow = 1\nrow = 0\nmatrix = C\nrow = 0 1\n"
      "h = 0.5 0\nsigma_u = 2\nsigma_z = 0.5\nassumed_snr_db = 20\n");
  const auto e = parse_config(ex);
  const auto s = e.system();
  CHECK(s.A(1, 0) == 1.0);
  CHECK(s.h(0) == 0.5);
  CHECK(s.vz(0) == 0.25);
  CHECK(e.assumed_snr_db == 20.0);

  std::istringstream same_a("kind = butterworth\norder = 4\nfc_hz = 2\nsigma_u = 1\nsigma_z = 0.1\n");
  std::istringstream same_b("# comment\nkind=butterworth\n\norder = 4\nfc_hz = 2\nsigma_u =   1\nsigma_z = 0.1\n");
  CHECK(parse_config(same_a).hash == parse_config(same_b).hash);
  CHECK(parse_config(same_a = std::istringstream("kind = butterworth\norder = 4\nfc_hz = 3\nsigma_u = 1\nsigma_z = 0.1\n")).hash !=
        cfg.hash);
}

TEST_CASE("config errors") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_config(in);
    } catch (const DataError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("kind = butterworth\norder = x\n", "line 2"));
  CHECK(fails_with("kind = butterworth\ncolour = red\n", "unknown key"));
  CHECK(fails_with("kind = butterworth\norder = 4\nsigma_u = 1\nsigma_z = 1\n", "fc_hz"));
  CHECK(fails_with("kind = explicit\nmatrix = A\nrow = -1 0\nrow = 1\n", "line 4"));
  CHECK(fails_with("kind = explicit\nmatrix = A\nrow = -1 0\nrow = 1 2\nmatrix = B\nrow = 1\nmatrix = C\nrow = 1 0\n"
                   "sigma_u = 1\nsigma_z = 1\n",
                   "B must have n rows"));
  CHECK(fails_with("sigma_u = 1\n", "kind"));
}

TEST_CASE("csv round trip and errors") {
  std::ostringstream out;
  write_csv(out, {{"seed", "3"}}, {"t", "v"}, {{0.1, 1.0 / 3.0}, {0.2, -2e-300}});
  std::istringstream in(out.str());
  const auto t = read_csv(in);
  CHECK(t.meta.at("seed") == "3");
  CHECK(t.rows[0][1] == 1.0 / 3.0);
  CHECK(t.rows[1][1] == -2e-300);
  CHECK(t.column_values("t")[0] == 0.1);

  std::istringstream bad("# x = 1\nt,v\n0.1,2\n0.2,abc\n");
  try {
    read_csv(bad, "f.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  std::istringstream ragged("t,v\n0.1\n");
  CHECK_THROWS_AS(read_csv(ragged), DataError);
  std::istringstream empty("# only comments\n");
  CHECK_THROWS_AS(read_csv(empty), DataError);
}

TEST_CASE("simulate writes a regular schedule and is reproducible") {
  TempDir dir;
  const auto model = dir.file("bw6.cfg", kBw6);
  const auto a = dir.file("a.csv"), b = dir.file("b.csv");
  REQUIRE(invoke({"simulate", "--model", model, "--fs", "10", "--duration", "5", "--seed", "7", "--out", a}).code == 0);
  REQUIRE(invoke({"simulate", "--model", model, "--fs", "10", "--duration", "5", "--seed", "7", "--out", b}).code == 0);
  CHECK(slurp(a) == slurp(b));
  const auto t = read_csv_file(a);
  REQUIRE(t.rows.size() == 50);
  CHECK(t.rows.front()[0] == doctest::Approx(0.1));
  CHECK(t.rows.back()[0] == doctest::Approx(5.0));
  CHECK(t.meta.at("seed") == "7");
  CHECK(t.header == std::vector<std::string>{"t", "y_tilde"});
  CHECK(invoke({"simulate", "--model", model, "--fs", "10", "--duration", "5", "--seed", "8", "--out", b}).code == 0);
  CHECK(slurp(a) != slurp(b));
}

TEST_CASE("simulate on an irregular schedule with truth") {
  TempDir dir;
  const auto model = dir.file("s.cfg", kScalar);
  const auto times = dir.file("times.csv", "t\n0.3\n0.35\n1.2\n");
  const auto out = dir.file("out.csv"), truth = dir.file("truth.csv");
  REQUIRE(invoke({"simulate", "--model", model, "--times", times, "--out", out, "--truth", truth, "--grid-step", "0.1"})
              .code == 0);
  const auto t = read_csv_file(out);
  CHECK(t.rows.size() == 3);
  CHECK(t.rows[1][0] == 0.35);
  const auto tr = read_csv_file(truth);
  CHECK(tr.header == std::vector<std::string>{"t", "x", "y", "u_avg"});
  CHECK(tr.rows.front()[0] == 0.0);
  CHECK(tr.rows.back()[0] == 1.2);
  CHECK(tr.rows.size() == 14);
}

TEST_CASE("simulated output variance matches the stationary value") {
  TempDir dir;
  const auto model = dir.file("bw6.cfg", kBw6);
  const auto out = dir.file("s.csv"), truth = dir.file("t.csv");
  REQUIRE(invoke({"simulate", "--model", model, "--fs", "10", "--duration", "1000", "--seed", "3", "--out", out, "--truth",
               truth})
              .code == 0);
  const auto y = read_csv_file(truth).column_values("y");
  REQUIRE(y.size() == 10001);
  double s2 = 0;
  for (std::size_t i = 1; i < y.size(); ++i) s2 += y[i] * y[i];
  s2 /= static_cast<double>(y.size() - 1);
  std::istringstream cfg(kBw6);
  const double ey2 = analysis::snr(parse_config(cfg).system()).ey2;
  CHECK(s2 == doctest::Approx(ey2).epsilon(0.1));
}

TEST_CASE("snr command") {
  TempDir dir;
  const auto r = invoke({"snr", "--model", dir.file("s.cfg", kScalar)});
  CHECK(r.code == 0);
  CHECK(r.out.find("snr = 0.5\n") != std::string::npos);
  const auto b = invoke({"snr", "--model", dir.file("b.cfg", kBw6)});
  CHECK(b.out.find("snr_constant = 2.023") != std::string::npos);
}

TEST_CASE("estimate") {
  TempDir dir;
  const auto model = dir.file("bw6.cfg", kBw6);
  const auto samples = dir.file("s.csv");
  REQUIRE(invoke({"simulate", "--model", model, "--fs", "10", "--duration", "20", "--seed", "5", "--out", samples}).code == 0);
  const auto y_tilde = read_csv_file(samples).column_values("y_tilde");

  SUBCASE("grid halving keeps shared records") {
    const auto a = dir.file("a.csv"), b = dir.file("b.csv");
    REQUIRE(invoke({"estimate", "--model", model, "--samples", samples, "--grid-step", "0.05", "--out", a}).code == 0);
    REQUIRE(invoke({"estimate", "--model", model, "--samples", samples, "--grid-step", "0.025", "--out", b}).code == 0);
    const auto ta = read_csv_file(a), tb = read_csv_file(b);
    CHECK(ta.header[0] == "t");
    CHECK(ta.header[3] == "u_hat");
    CHECK(ta.header.back() == "x_mean_6");
    REQUIRE(tb.rows.size() == 2 * ta.rows.size() - 1);
    for (std::size_t i = 0; i < ta.rows.size(); ++i) {
      CHECK(ta.rows[i][0] == tb.rows[2 * i][0]);
      for (std::size_t c = 1; c < ta.header.size(); ++c) {
        CHECK(std::abs(ta.rows[i][c] - tb.rows[2 * i][c]) <= 1e-12 * std::max(1.0, std::abs(ta.rows[i][c])));
      }
    }
  }
  SUBCASE("a huge assumed SNR interpolates the samples") {
    // y_tilde - y_hat shrinks like 1 / sigma_u^2, i.e. 100x per 20 dB.
    auto worst_at = [&](const char* db) {
      const auto a = dir.file(std::string("a") + db + ".csv");
      REQUIRE(invoke({"estimate", "--model", model, "--samples", samples, "--assumed-snr-db", db, "--out", a}).code == 0);
      const auto yh = read_csv_file(a).column_values("y_hat");
      REQUIRE(yh.size() == y_tilde.size());
      double worst = 0;
      for (std::size_t k = 0; k < yh.size(); ++k) worst = std::max(worst, std::abs(yh[k] - y_tilde[k]));
      return worst;
    };
    const double w100 = worst_at("100"), w120 = worst_at("120"), w160 = worst_at("160");
    CHECK(w120 / w100 == doctest::Approx(0.01).epsilon(0.1));
    CHECK(w160 / w120 == doctest::Approx(1e-4).epsilon(0.1));
    CHECK(worst_at("200") < 1e-8);
  }
  SUBCASE("a low assumed SNR shrinks the estimate") {
    const auto a = dir.file("a.csv"), b = dir.file("b.csv");
    REQUIRE(invoke({"estimate", "--model", model, "--samples", samples, "--out", a}).code == 0);
    REQUIRE(invoke({"estimate", "--model", model, "--samples", samples, "--assumed-snr-db", "-10", "--out", b}).code == 0);
    auto var = [](const std::vector<double>& v) {
      double m = 0, s = 0;
      for (double x : v) m += x / v.size();
      for (double x : v) s += (x - m) * (x - m) / v.size();
      return s;
    };
    CHECK(var(read_csv_file(b).column_values("y_hat")) < var(read_csv_file(a).column_values("y_hat")));
  }
}

TEST_CASE("estimate round trip error is consistent with the analysis tables") {
  TempDir dir;
  std::string cfg_text = "kind = butterworth\norder = 6\nfc_hz = 1\nsigma_u = 1\n";
  std::istringstream base{std::string(kBw6)};
  const double ey2 = analysis::snr(parse_config(base).system()).ey2;
  cfg_text += "sigma_z = " + format_number(std::sqrt(ey2 / 10.0)) + "\n";  // 10 dB
  const auto model = dir.file("m.cfg", cfg_text);
  double err = 0;
  std::size_t count = 0;
  for (int seed = 1; seed <= 8; ++seed) {
    const auto s = dir.file("s.csv"), t = dir.file("t.csv"), e = dir.file("e.csv");
    REQUIRE(invoke({"simulate", "--model", model, "--fs", "10", "--duration", "50", "--seed", std::to_string(seed), "--out",
                 s, "--truth", t})
                .code == 0);
    REQUIRE(invoke({"estimate", "--model", model, "--samples", s, "--out", e}).code == 0);
    const auto y = read_csv_file(t).column_values("y");
    const auto yh = read_csv_file(e).column_values("y_hat");
    for (std::size_t k = 50; k + 50 < yh.size(); ++k) {
      err += (yh[k] - y[k + 1]) * (yh[k] - y[k + 1]);
      ++count;
    }
  }
  const double cli_db = 10 * std::log10(err / static_cast<double>(count) / ey2);

  std::istringstream cfg(cfg_text);
  analysis::ErrorCurveOptions opt;
  opt.fs_over_fc = {10};
  opt.snr_db = {10};
  opt.trials = 8;
  const auto cells = analysis::output_error_curve(parse_config(cfg).system(), 1.0, opt);
  CHECK(std::abs(cli_db - cells[0].snr_out_inv_db) < 1.0);
}

TEST_CASE("usage and data errors map to exit codes") {
  TempDir dir;
  const auto model = dir.file("bw6.cfg", kBw6);
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"bogus"}).code == 1);
  CHECK(invoke({"simulate", "--fs", "10"}).code == 1);
  CHECK(invoke({"simulate", "--model", model}).code == 1);
  CHECK(invoke({"simulate", "--model", model, "--fs", "abc", "--duration", "1"}).code == 1);
  CHECK(invoke({"snr", "--model", dir.file("missing.cfg")}).code == 2);
  CHECK(invoke({"snr", "--model", dir.file("bad.cfg", "kind = nope\n")}).code == 2);
  CHECK(invoke({"--help"}).code == 0);

  const auto bad = dir.file("bad.csv", "# t0 = 0\nt,y_tilde\n0.1,1\n0.2,oops\n");
  const auto r = invoke({"estimate", "--model", model, "--samples", bad});
  CHECK(r.code == 2);
  CHECK(r.err.find("row 2") != std::string::npos);
  const auto unsorted = dir.file("u.csv", "t,y_tilde\n0.2,1\n0.1,1\n");
  CHECK(invoke({"estimate", "--model", model, "--samples", unsorted}).code == 2);
  const auto ok = dir.file("ok.csv", "t,y_tilde\n0.2,1\n0.3,1\n");
  CHECK(invoke({"estimate", "--model", model, "--samples", ok, "--grid-step", "0"}).code == 1);
  CHECK(invoke({"estimate", "--model", dir.file("i.cfg", kIntegrator), "--samples", ok}).code == 0);
  CHECK(invoke({"sweep", "--model", dir.file("s.cfg", kScalar)}).code == 2);
}

TEST_CASE("sweep writes the error table") {
  TempDir dir;
  const auto out = dir.file("sweep.csv");
  const auto r = invoke({"sweep", "--model", dir.file("bw4.cfg", "kind = butterworth\norder = 4\nfc_hz = 1\nsigma_u = 1\nsigma_z = 1\n"),
                      "--oversampling", "8,16", "--snr-db", "10,30", "--trials", "2", "--horizon", "50", "--out", out});
  CHECK(r.code == 0);
  const auto t = read_csv_file(out);
  CHECK(t.header == std::vector<std::string>{"fs_over_fc", "snr_db", "snr_out_inv_db"});
  CHECK(t.rows.size() == 4);
  CHECK(r.out.find("slope_db_per_doubling") != std::string::npos);
}

TEST_CASE("oracle check") {
  TempDir dir;
  const auto integ = dir.file("i.cfg", kIntegrator);
  const auto r = invoke({"oracle-check", "--model", integ, "--count", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);

  const auto bw4 = dir.file("bw4.cfg", "kind = butterworth\norder = 4\nfc_hz = 1\nsigma_u = 1\nsigma_z = 0.3\n");
  const auto ok = invoke({"oracle-check", "--model", bw4, "--count", "10", "--substeps", "64,128,256,512"});
  CHECK(ok.code == 3);  // the error at N = 512 is still above 1e-3
  CHECK(invoke({"oracle-check", "--model", bw4, "--count", "10"}).code == 0);
  CHECK(invoke({"oracle-check", "--model", bw4, "--count", "10", "--oracle-sigma-scale", "2"}).code == 3);
  CHECK(invoke({"oracle-check", "--model", bw4, "--substeps", "64,100"}).code == 2);
}
