#include "hiso/error.hpp"

#include <sstream>

namespace hiso {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidDimension: return "invalid-dimension";
    case ErrorKind::kInvalidArity: return "invalid-arity";
    case ErrorKind::kCurvatureViolation: return "curvature-violation";
    case ErrorKind::kEstimatorFailure: return "estimator-failure";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kProtocolOrder: return "protocol-order";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

namespace {

std::string describe(Evaluation which, double value, std::int64_t round, std::int64_t step,
                     std::int64_t perturbation) {
  std::ostringstream os;
  os << "estimator failure: ";
  switch (which) {
    case Evaluation::kBase: os << "loss(x)"; break;
    case Evaluation::kPerturbed: os << "loss(x + mu z)"; break;
    case Evaluation::kQuotient: os << "difference quotient"; break;
  }
  os << " = " << value;
  if (round >= 0) os << " at round " << round << ", step " << step << ", perturbation " << perturbation;
  return os.str();
}

}  // namespace

EstimatorFailure::EstimatorFailure(Evaluation which, double value, std::int64_t round,
                                   std::int64_t step, std::int64_t perturbation)
    : Error(ErrorKind::kEstimatorFailure, describe(which, value, round, step, perturbation)),
      which_(which),
      value_(value),
      round_(round),
      step_(step),
      perturbation_(perturbation) {}

ParseError::ParseError(std::size_t offset, const std::string& what)
    : Error(ErrorKind::kParse, what + " at byte " + std::to_string(offset)), offset_(offset) {}

}  // namespace hiso
