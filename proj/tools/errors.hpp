#pragma once

#include <stdexcept>

namespace ctsmooth::cli {

// Mapped to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mapped to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ctsmooth::cli
