#include "config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ctsmooth::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw DataError("config line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& tok, int line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(line, "not a number: '" + tok + "'");
  return v;
}

std::vector<double> parse_numbers(const std::string& value, int line) {
  std::istringstream ss(value);
  std::vector<double> out;
  for (std::string tok; ss >> tok;) out.push_back(parse_number(tok, line));
  if (out.empty()) fail(line, "expected at least one number");
  return out;
}

double parse_scalar(const std::string& value, int line) {
  const auto v = parse_numbers(value, line);
  if (v.size() != 1) fail(line, "expected a single number");
  return v[0];
}

Mat to_matrix(const std::vector<std::vector<double>>& rows, const std::string& name) {
  if (rows.empty()) throw DataError("config: matrix " + name + " has no rows");
  Mat M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DataError("config: matrix " + name + " has ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return M;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ModelConfig parse_config(std::istream& in) {
  ModelConfig cfg;
  std::map<std::string, std::vector<std::vector<double>>> matrices;
  std::string current_matrix;
  std::optional<std::string> kind;
  std::optional<int> order;
  std::optional<std::vector<double>> h;
  bool have_sigma_u = false;
  std::string normalized;

  std::string raw;
  for (int line = 1; std::getline(in, raw); ++line) {
    const auto hash_pos = raw.find('#');
    const std::string text = trim(hash_pos == std::string::npos ? raw : raw.substr(0, hash_pos));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (value.empty()) fail(line, "missing value for '" + key + "'");
    normalized += key + "=" + value + "\n";

    if (key == "kind") {
      if (value != "butterworth" && value != "explicit") fail(line, "unknown kind '" + value + "'");
      kind = value;
    } else if (key == "order") {
      const double v = parse_scalar(value, line);
      if (v != static_cast<int>(v) || v < 1) fail(line, "order must be a positive integer");
      order = static_cast<int>(v);
    } else if (key == "fc_hz") {
      cfg.fc_hz = parse_scalar(value, line);
    } else if (key == "sigma_u") {
      cfg.sigma_u = parse_scalar(value, line);
      have_sigma_u = true;
    } else if (key == "sigma_z") {
      cfg.sigma_z = parse_numbers(value, line);
    } else if (key == "assumed_snr_db") {
      cfg.assumed_snr_db = parse_scalar(value, line);
    } else if (key == "prior_var") {
      cfg.prior_var = parse_scalar(value, line);
      if (!(*cfg.prior_var >= 0.0)) fail(line, "prior_var must be >= 0");
    } else if (key == "matrix") {
      if (value != "A" && value != "B" && value != "C") fail(line, "matrix must be A, B or C");
      if (matrices.count(value)) fail(line, "matrix " + value + " given twice");
      current_matrix = value;
      matrices[value];
    } else if (key == "row") {
      if (current_matrix.empty()) fail(line, "'row' before any 'matrix'");
      auto& rows = matrices[current_matrix];
      rows.push_back(parse_numbers(value, line));
      if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
        fail(line, "row of matrix " + current_matrix + " has " + std::to_string(rows.back().size()) +
                       " entries, expected " + std::to_string(rows.front().size()));
      }
    } else if (key == "h") {
      h = parse_numbers(value, line);
    } else {
      fail(line, "unknown key '" + key + "'");
    }
  }

  if (!kind) throw DataError("config: missing 'kind'");
  if (!have_sigma_u) throw DataError("config: missing 'sigma_u'");
  if (cfg.sigma_z.empty()) throw DataError("config: missing 'sigma_z'");

  if (*kind == "butterworth") {
    if (!order) throw DataError("config: butterworth needs 'order'");
    if (!cfg.fc_hz) throw DataError("config: butterworth needs 'fc_hz'");
    if (!matrices.empty() || h) throw DataError("config: butterworth models take no matrices");
    if (cfg.sigma_z.size() != 1) throw DataError("config: butterworth models have one output");
    cfg.builtin = ModelConfig::Builtin{*kind, *order, *cfg.fc_hz};
  } else {
    if (order) throw DataError("config: 'order' only applies to builtin models");
    for (const char* name : {"A", "B", "C"}) {
      if (!matrices.count(name)) throw DataError(std::string("config: missing matrix ") + name);
    }
    ModelConfig::Explicit ex;
    ex.A = to_matrix(matrices["A"], "A");
    ex.B = to_matrix(matrices["B"], "B");
    ex.C = to_matrix(matrices["C"], "C");
    ex.h = h ? Eigen::Map<const Vec>(h->data(), static_cast<Eigen::Index>(h->size())) : Vec(Vec::Zero(ex.A.rows()));
    cfg.explicit_model = std::move(ex);
  }
  cfg.hash = fnv1a(normalized);
  // Surface dimension errors at load time.
  try {
    cfg.system().validate();
  } catch (const std::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return cfg;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  return parse_config(in);
}

ContinuousLTISystem ModelConfig::system() const {
  Vec vz(static_cast<Eigen::Index>(sigma_z.size()));
  for (std::size_t i = 0; i < sigma_z.size(); ++i) vz(static_cast<Eigen::Index>(i)) = sigma_z[i] * sigma_z[i];
  if (builtin) {
    ContinuousLTISystem s = butterworth(builtin->order, builtin->fc_hz, sigma_u, sigma_z.at(0));
    return s;
  }
  ContinuousLTISystem s = ContinuousLTISystem::make(explicit_model->A, explicit_model->B, explicit_model->C,
                                                    sigma_u, vz);
  s.h = explicit_model->h;
  return s;
}

std::optional<double> ModelConfig::cutoff_hz() const { return fc_hz; }

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace ctsmooth::cli
