#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "ctsmooth/model.hpp"
#include "errors.hpp"

namespace ctsmooth::cli {

// Model description read from a `key = value` text file.
//
//   kind = butterworth          kind = explicit
//   order = 4                   matrix = A
//   fc_hz = 1                   row = -1 0
//   sigma_u = 1                 row = 1 -2
//   sigma_z = 0.1               matrix = B
//                               row = 1
//                               row = 0
//                               matrix = C
//                               row = 0 1
//                               h = 0 0
//                               sigma_u = 1
//                               sigma_z = 0.5
//
// Optional keys: assumed_snr_db, fc_hz (explicit models), prior_var.
struct ModelConfig {
  struct Builtin {
    std::string kind;
    int order = 0;
    double fc_hz = 0.0;
  };
  struct Explicit {
    Mat A, B, C;
    Vec h;
  };

  std::optional<Builtin> builtin;
  std::optional<Explicit> explicit_model;
  double sigma_u = 1.0;
  std::vector<double> sigma_z;
  std::optional<double> assumed_snr_db;
  std::optional<double> fc_hz;
  // Isotropic zero-mean prior on x(t0); used instead of the stationary
  // prior, and required for non-Hurwitz models.
  std::optional<double> prior_var;
  std::uint64_t hash = 0;

  ContinuousLTISystem system() const;
  std::optional<double> cutoff_hz() const;
};

ModelConfig parse_config(std::istream& in);
ModelConfig load_config(const std::string& path);

std::string hash_hex(std::uint64_t hash);

}  // namespace ctsmooth::cli
