#pragma once

#include <stdexcept>
#include <string>

namespace qcs {

// Base of every error thrown by the engine. The CLI maps subclasses onto
// exit codes (see tools/qcs.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value: bit depth, step, seed dims, schedule entries.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Invalid numeric input (NaN, non-finite sample) or malformed file contents.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// sigma = beta * d_i = 0: hard quantization has no smooth likelihood.
class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

// Spectral transition with negative decay.
class StabilityError : public Error {
 public:
  using Error::Error;
};

// Files or parameter sets that are individually valid but disagree.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail
}  // namespace qcs
