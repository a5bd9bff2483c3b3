#pragma once

#include <stdexcept>
#include <string>

namespace specemu {

struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientReplicates : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CoverageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MissingSource : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace specemu
