#pragma once

#include <stdexcept>
#include <string>

namespace poisonbench {

// Base for everything this library throws on purpose. The CLI maps the four
// branches below onto its exit codes, so new error types should pick a branch.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: unknown keys, out-of-range values, inconsistent specs.
struct ConfigError : Error {
  using Error::Error;
};

// Anything wrong with input data or files on disk.
struct DataError : Error {
  using Error::Error;
};

struct FileNotFoundError : DataError {
  using DataError::DataError;
};
struct MalformedRowError : DataError {
  using DataError::DataError;
};
struct MissingLabelColumnError : DataError {
  using DataError::DataError;
};
struct AllRowsDroppedError : DataError {
  using DataError::DataError;
};
struct ColumnAllMissingError : DataError {
  using DataError::DataError;
};
struct DegenerateSplitError : DataError {
  using DataError::DataError;
};
struct OutputUnwritableError : DataError {
  using DataError::DataError;
};

// Training / scoring failures.
struct ModelError : Error {
  using Error::Error;
};

struct SingleClassTrainingError : ModelError {
  using ModelError::ModelError;
};
struct NonFiniteLossError : ModelError {
  using ModelError::ModelError;
};
struct DimensionMismatchError : ModelError {
  using ModelError::ModelError;
};
struct InvalidHyperparamsError : ModelError {
  using ModelError::ModelError;
};

// Poisoning failures.
struct PoisonError : Error {
  using Error::Error;
};

struct StalePlanError : PoisonError {
  using PoisonError::PoisonError;
};
struct UnsupportedThreatError : PoisonError {
  using PoisonError::PoisonError;
};

// Metric computation failures.
struct MetricError : Error {
  using Error::Error;
};

struct LengthMismatchError : MetricError {
  using MetricError::MetricError;
};
struct InvalidLabelError : MetricError {
  using MetricError::MetricError;
};
struct SingleClassEvaluationError : MetricError {
  using MetricError::MetricError;
};

// A cell of the experiment grid failed; message names the model and fraction.
struct HarnessError : Error {
  using Error::Error;
};

struct GridMismatchError : Error {
  using Error::Error;
};

}  // namespace poisonbench
