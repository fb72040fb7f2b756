#ifndef HISO_ERROR_HPP
#define HISO_ERROR_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hiso {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidDimension,
  kInvalidArity,
  kCurvatureViolation,
  kEstimatorFailure,
  kShapeMismatch,
  kProtocolOrder,
  kRange,
  kParse,
  kConfig,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Which of the two loss evaluations of a forward difference went non-finite.
enum class Evaluation { kBase, kPerturbed, kQuotient };

/// A non-finite loss or gradient scalar. Coordinates are filled in by the
/// caller that knows them (fedsim); -1 means unknown.
class EstimatorFailure : public Error {
 public:
  EstimatorFailure(Evaluation which, double value, std::int64_t round = -1,
                   std::int64_t step = -1, std::int64_t perturbation = -1);

  Evaluation which() const noexcept { return which_; }
  double value() const noexcept { return value_; }
  std::int64_t round() const noexcept { return round_; }
  std::int64_t step() const noexcept { return step_; }
  std::int64_t perturbation() const noexcept { return perturbation_; }

  EstimatorFailure at(std::int64_t round, std::int64_t step,
                      std::int64_t perturbation) const {
    return EstimatorFailure(which_, value_, round, step, perturbation);
  }

 private:
  Evaluation which_;
  double value_;
  std::int64_t round_;
  std::int64_t step_;
  std::int64_t perturbation_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Rejected configuration; field() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(ErrorKind::kConfig, field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace hiso

#endif  // HISO_ERROR_HPP
