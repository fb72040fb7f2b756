#ifndef HISO_CURVATURE_HPP
#define HISO_CURVATURE_HPP

#include <iosfwd>

#include "hiso/types.hpp"

namespace hiso {

/// EMA rate, positivity floor and clipping bounds of the learned curvature.
struct HessianConfig {
  double nu = 0.05;
  double epsilon = 1e-8;
  double beta_lower = 1e-6;
  double beta_upper = 1e6;

  /// Throws ConfigError naming the first bad field.
  void validate() const;

  friend bool operator==(const HessianConfig&, const HessianConfig&) = default;
};

/// Strictly positive diagonal curvature estimate with every entry inside
/// [beta_lower, beta_upper]. Immutable; updates return new values.
class DiagHessian {
 public:
  /// Throws if any entry lies outside the configured bounds.
  DiagHessian(ModelVector diag, HessianConfig config);

  /// H = I, clipped into the bounds when 1 lies outside them.
  static DiagHessian identity(Eigen::Index dim, HessianConfig config = {});

  const ModelVector& diag() const noexcept { return diag_; }
  const HessianConfig& config() const noexcept { return config_; }
  Eigen::Index dim() const noexcept { return diag_.size(); }

  friend bool operator==(const DiagHessian& a, const DiagHessian& b) {
    return a.config_ == b.config_ && a.diag_.size() == b.diag_.size() &&
           (a.diag_.array() == b.diag_.array()).all();
  }

 private:
  ModelVector diag_;
  HessianConfig config_;
};

/// One EMA step with the global delta of a local step:
/// diag' = clip((1 - nu) * diag + nu * (delta^2 + epsilon), beta_lower, beta_upper).
DiagHessian ema_update(const DiagHessian& hessian, const ModelVector& delta);

/// Elementwise 1 / sqrt(diag).
ModelVector inv_sqrt(const DiagHessian& hessian);

/// Variance quantities for a task with known diagonal curvature sigma.
struct CurvatureDiagnostics {
  double effective_rank_kappa = 0.0;   // sum(sigma) / L
  double whitening_rank_zeta = 0.0;    // sum(sigma / diag)
  double spectral_term = 0.0;          // max(sigma / diag)
};

CurvatureDiagnostics diagnostics(const DiagHessian& hessian, const ModelVector& sigma, double L);

/// Order statistics of the diagonal for the per-round metrics stream.
struct HessianSummary {
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

HessianSummary summarize(const DiagHessian& hessian);

/// Raw little-endian float64 dump of the diagonal, no header.
void write_diag(std::ostream& out, const DiagHessian& hessian);

}  // namespace hiso

#endif  // HISO_CURVATURE_HPP
