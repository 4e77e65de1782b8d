#pragma once

#include <stdexcept>
#include <string>

namespace hdmean {

// Invalid or inconsistent input: bad dimensions, malformed files, out-of-range
// parameters. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: degenerate variance estimates, factorization failure,
// quadrature non-convergence. Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hdmean
