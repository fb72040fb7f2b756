#include "hiso/zo.hpp"

#include <cmath>

namespace hiso {

void SmoothingParams::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("mu", "must be finite and > 0");
}

Direction hessian_informed_direction(const DiagHessian& hessian, const ModelVector& u) {
  return hessian_informed_direction(hessian.diag(), u);
}

ModelVector step_delta(GradScalar g, const Direction& z) { return g.value * z.vector; }

ModelVector multi_perturbation_delta(std::span<const GradScalar> scalars,
                                     std::span<const Direction> directions) {
  if (scalars.empty() || scalars.size() != directions.size()) {
    throw Error(ErrorKind::kInvalidArity,
                "multi_perturbation_delta: need equal, nonzero numbers of scalars and directions");
  }
  const Eigen::Index dim = directions.front().vector.size();
  for (const Direction& z : directions) {
    if (z.vector.size() != dim) {
      throw Error(ErrorKind::kInvalidDimension, "multi_perturbation_delta: direction sizes differ");
    }
  }
  ModelVector delta = scalars[0].value * directions[0].vector;
  for (std::size_t p = 1; p < scalars.size(); ++p) {
    delta += scalars[p].value * directions[p].vector;
  }
  if (scalars.size() > 1) delta /= static_cast<double>(scalars.size());
  return delta;
}

}  // namespace hiso
