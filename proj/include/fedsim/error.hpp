#pragma once

#include <stdexcept>

namespace fedsim {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration value (dimensions, hyperparameters, config files).
struct ConfigError : Error {
  using Error::Error;
};

// Dimension mismatch between parameters, features, or labels.
struct ShapeError : Error {
  using Error::Error;
};

// Dataset file cannot be read or parsed.
struct LoadError : Error {
  using Error::Error;
};

// Federated protocol contract violation (empty update set, bad shards).
struct ProtocolError : Error {
  using Error::Error;
};

// Two runs that cannot be compared (different models, unreadable reports).
struct ComparisonError : Error {
  using Error::Error;
};

}  // namespace fedsim
