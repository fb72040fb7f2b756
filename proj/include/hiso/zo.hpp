#ifndef HISO_ZO_HPP
#define HISO_ZO_HPP

#include <cmath>
#include <span>
#include <utility>

#include "hiso/curvature.hpp"
#include "hiso/error.hpp"
#include "hiso/types.hpp"

namespace hiso {

/// Forward-difference step mu.
struct SmoothingParams {
  double mu = 1e-3;

  void validate() const;
};

/// The scalar g that, paired with a seed, encodes a whole update.
struct GradScalar {
  double value = 0.0;
};

/// A perturbation direction z = H^{-1/2} u (z = u when H = I).
struct Direction {
  ModelVector vector;
};

/// (loss(x + mu z) - base_loss) / mu, where base_loss = loss(x) was computed
/// on the same batch. Lets P perturbations share one base evaluation.
template <typename LossFn>
GradScalar rge_scalar(LossFn&& loss, double base_loss, const ModelVector& x,
                      const Direction& z, SmoothingParams smoothing) {
  if (z.vector.size() != x.size()) {
    throw Error(ErrorKind::kInvalidDimension, "rge_scalar: direction and iterate differ in size");
  }
  if (!std::isfinite(base_loss)) throw EstimatorFailure(Evaluation::kBase, base_loss);
  const ModelVector shifted = x + smoothing.mu * z.vector;
  const double perturbed = std::forward<LossFn>(loss)(shifted);
  if (!std::isfinite(perturbed)) throw EstimatorFailure(Evaluation::kPerturbed, perturbed);
  const double g = (perturbed - base_loss) / smoothing.mu;
  if (!std::isfinite(g)) throw EstimatorFailure(Evaluation::kQuotient, g);
  return {g};
}

/// (loss(x + mu z) - loss(x)) / mu with both evaluations on the batch the
/// loss callable is bound to.
template <typename LossFn>
GradScalar rge_scalar(LossFn&& loss, const ModelVector& x, const Direction& z,
                      SmoothingParams smoothing) {
  const double base = loss(x);
  return rge_scalar(std::forward<LossFn>(loss), base, x, z, smoothing);
}

/// z_i = u_i / sqrt(h_i) for a raw curvature diagonal. Throws
/// kCurvatureViolation when any h_i <= 0.
template <typename DerivedH, typename DerivedU>
Direction hessian_informed_direction(const Eigen::MatrixBase<DerivedH>& diag,
                                     const Eigen::MatrixBase<DerivedU>& u) {
  if (diag.size() != u.size()) {
    throw Error(ErrorKind::kInvalidDimension, "hessian_informed_direction: size mismatch");
  }
  if (!(diag.array() > 0.0).all()) {
    throw Error(ErrorKind::kCurvatureViolation, "hessian_informed_direction: curvature must be > 0");
  }
  return {(u.array() / diag.array().sqrt()).matrix()};
}

Direction hessian_informed_direction(const DiagHessian& hessian, const ModelVector& u);

/// g * z.
ModelVector step_delta(GradScalar g, const Direction& z);

/// (1/P) sum_p g_p z_p, accumulated in ascending p. P = 1 returns step_delta
/// bit for bit.
ModelVector multi_perturbation_delta(std::span<const GradScalar> scalars,
                                     std::span<const Direction> directions);

}  // namespace hiso

#endif  // HISO_ZO_HPP
