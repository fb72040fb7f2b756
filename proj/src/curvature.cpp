#include "hiso/curvature.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "hiso/error.hpp"

namespace hiso {

void HessianConfig::validate() const {
  if (!(nu >= 0.0 && nu <= 1.0)) throw ConfigError("nu", "must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be > 0");
  if (!(beta_lower > 0.0)) throw ConfigError("beta_lower", "must be > 0");
  if (!(beta_upper >= beta_lower) || !std::isfinite(beta_upper)) {
    throw ConfigError("beta_upper", "must be finite and >= beta_lower");
  }
}

DiagHessian::DiagHessian(ModelVector diag, HessianConfig config)
    : diag_(std::move(diag)), config_(config) {
  config_.validate();
  if (diag_.size() < 1) throw Error(ErrorKind::kInvalidDimension, "DiagHessian: empty diagonal");
  if (!((diag_.array() >= config_.beta_lower).all() && (diag_.array() <= config_.beta_upper).all())) {
    throw Error(ErrorKind::kCurvatureViolation, "DiagHessian: entries outside [beta_lower, beta_upper]");
  }
}

DiagHessian DiagHessian::identity(Eigen::Index dim, HessianConfig config) {
  const double one = std::clamp(1.0, config.beta_lower, config.beta_upper);
  return DiagHessian(ModelVector::Constant(dim, one), config);
}

DiagHessian ema_update(const DiagHessian& hessian, const ModelVector& delta) {
  if (delta.size() != hessian.dim()) {
    throw Error(ErrorKind::kInvalidDimension, "ema_update: delta size differs from curvature");
  }
  const HessianConfig& c = hessian.config();
  ModelVector next = (1.0 - c.nu) * hessian.diag().array() +
                     c.nu * (delta.array().square() + c.epsilon);
  next = next.cwiseMax(c.beta_lower).cwiseMin(c.beta_upper);
  return DiagHessian(std::move(next), c);
}

ModelVector inv_sqrt(const DiagHessian& hessian) {
  return hessian.diag().array().sqrt().inverse().matrix();
}

CurvatureDiagnostics diagnostics(const DiagHessian& hessian, const ModelVector& sigma, double L) {
  if (!(L > 0.0)) throw Error(ErrorKind::kInvalidArgument, "diagnostics: L must be > 0");
  if (sigma.size() != hessian.dim()) {
    throw Error(ErrorKind::kInvalidDimension, "diagnostics: sigma size differs from curvature");
  }
  if ((sigma.array() < 0.0).any()) {
    throw Error(ErrorKind::kInvalidArgument, "diagnostics: sigma must be nonnegative");
  }
  const auto whitened = sigma.array() / hessian.diag().array();
  return {sigma.sum() / L, whitened.sum(), whitened.maxCoeff()};
}

namespace {

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

HessianSummary summarize(const DiagHessian& hessian) {
  std::vector<double> v(hessian.diag().data(), hessian.diag().data() + hessian.dim());
  std::sort(v.begin(), v.end());
  return {v.front(), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), v.back(),
          hessian.diag().mean()};
}

void write_diag(std::ostream& out, const DiagHessian& hessian) {
  for (Eigen::Index i = 0; i < hessian.dim(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(hessian.diag()[i]);
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    out.write(buf, 8);
  }
}

}  // namespace hiso
