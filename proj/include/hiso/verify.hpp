#ifndef HISO_VERIFY_HPP
#define HISO_VERIFY_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hiso/fedsim.hpp"
#include "hiso/rng.hpp"
#include "hiso/run_spec.hpp"
#include "hiso/types.hpp"

namespace hiso {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double runtime_ms = 0.0;
  std::string detail;
};

struct VerificationReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  nlohmann::json to_json() const;
};

// Fourth moment of a diagonal-covariance Gaussian.

/// Tr(W Lambda) Lambda + 2 Lambda W Lambda.
Matrix<double> fourth_moment_target(const ModelVector& lambda, const Matrix<double>& w);

/// Monte Carlo mean of z z^T W z z^T with z ~ N(0, Diag(lambda)).
Matrix<double> fourth_moment_monte_carlo(const ModelVector& lambda, const Matrix<double>& w,
                                         std::uint64_t samples, Seed seed);

/// max_ij |est_ij - target_ij| / max(|target_ij|, floor * max|target|).
double entrywise_relative_error(const Matrix<double>& estimate, const Matrix<double>& target,
                                double floor = 0.5);

/// Mean and standard error per coordinate of the Hessian-informed forward
/// difference delta on f(x) = 1/2 x^T Diag(a) x + b^T x.
struct MeanEstimate {
  ModelVector mean;
  ModelVector standard_error;
};
MeanEstimate quadratic_delta_mean(const ModelVector& a, const ModelVector& b, const ModelVector& x,
                                  const ModelVector& hessian_diag, double mu,
                                  std::uint64_t samples, Seed seed, std::size_t perturbations = 1);

/// max_i |mean_i - expected_i| / se_i.
double max_standard_errors(const MeanEstimate& estimate, const ModelVector& expected);

/// Lemma checks: five random (Lambda, W) pairs at 3% with dim <= 6, the
/// standard case, and forward-difference unbiasedness at 3 standard errors.
VerificationReport verify_lemmas(std::size_t dim, std::uint64_t samples, Seed seed);

/// A fuzzed configuration for the scalar-vs-vector comparison.
struct FuzzCase {
  RunSpec spec;
  std::string describe() const;
};
FuzzCase fuzz_case(Seed seed);

/// Runs the scalar protocol and the full-vector oracle and compares global
/// models bitwise after every round. Returns the check and the max gap.
CheckResult equivalence_check(const RunSpec& spec, const std::string& name);

VerificationReport verify_equivalence(std::size_t count, Seed seed);

}  // namespace hiso

#endif  // HISO_VERIFY_HPP
