#pragma once

#include <stdexcept>
#include <string>

namespace ctsmooth {

// Malformed arguments: wrong dimensions, non-finite entries, out-of-range
// scalars, unsorted time grids.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A linear solve that must be well conditioned for valid inputs was not.
// Indicates a corrupted message (non-PSD covariance or precision).
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation requires a Hurwitz state matrix.
class StabilityRequired : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frequency response evaluated at an eigenvalue of A.
class FrequencyAtPole : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Query time outside the smoothed interval.
class OutOfDomain : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Requested feature lies outside the supported model (e.g. exact
// observations, multivariate SNR).
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctsmooth
