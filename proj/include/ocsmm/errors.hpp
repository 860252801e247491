#pragma once

#include <stdexcept>
#include <string>

namespace ocsmm {

/// Malformed or inconsistent input data (bad files, ragged dimensions, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ocsmm
