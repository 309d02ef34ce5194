#pragma once

#include <stdexcept>

namespace dacl {

// Bad run configuration (conflicting flags, impossible split sizes, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data; message carries file and line where known.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A loss or parameter became non-finite during training.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dacl
