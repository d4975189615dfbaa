#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kbsa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or construction parameters. `path` names the
// offending field when it is known (e.g. "estimator.m1").
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, std::string path = {})
      : Error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Any failure of the estimation pipeline.
class EstimationError : public Error {
 public:
  using Error::Error;
};

// A ratio whose denominator vanished: Ê w_e(x_u, ·) = 0, μ̂_c^k = 0, Σ w_e = 0.
class ZeroDenominatorError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// Weight incompatible with the input support (all pilot evaluations 0,
// non-finite values, rejection starvation).
class DegenerateWeightError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// Conditional CDF never reaches the requested level.
class NonBracketingError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class ModelEvaluationError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

// External-model failures. `request_id` is the first request left unanswered.
class ExternalModelError : public ModelEvaluationError {
 public:
  ExternalModelError(const std::string& msg, std::uint64_t request_id)
      : ModelEvaluationError(msg + " (request id " + std::to_string(request_id) + ")"),
        request_id_(request_id) {}
  std::uint64_t request_id() const { return request_id_; }

 private:
  std::uint64_t request_id_;
};

class ProtocolError : public ExternalModelError {
 public:
  using ExternalModelError::ExternalModelError;
};

class TimeoutError : public ExternalModelError {
 public:
  using ExternalModelError::ExternalModelError;
};

class ProcessExitError : public ExternalModelError {
 public:
  using ExternalModelError::ExternalModelError;
};

}  // namespace kbsa
