#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cetn {

// All numeric work is double precision, row-major.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes (both shapes are named in the message).
struct DimensionError : Error {
  using Error::Error;
};

/// Math domain violation (log of non-positive value, sqrt of negative, ...).
struct DomainError : Error {
  using Error::Error;
};

/// API contract violation (non-scalar backward root, double backward, ...).
struct ContractError : Error {
  using Error::Error;
};

/// Invalid or inconsistent configuration / dataset combination.
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite value encountered during training or inference.
struct NumericError : Error {
  using Error::Error;
};

/// Metric undefined for the given input (single-class AUC, base AUC <= 0.5).
struct MetricError : Error {
  using Error::Error;
};

/// File could not be read, written or parsed.
struct IoError : Error {
  using Error::Error;
};

}  // namespace cetn
