#include "hiso/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hiso/error.hpp"
#include "hiso/zo.hpp"

namespace hiso {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagLemmaPair = 301;
constexpr std::uint64_t kTagLemmaDraws = 302;
constexpr std::uint64_t kTagUnbiased = 303;

double since_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Matrix<double> random_symmetric(Eigen::Index d, CounterStream& s) {
  Matrix<double> w(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) w(i, j) = w(j, i) = s.next_gaussian();
  }
  return w;
}

bool bitwise_equal(const ModelVector& a, const ModelVector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

bool VerificationReport::all_passed() const {
  for (const CheckResult& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

json VerificationReport::to_json() const {
  json out = json::array();
  for (const CheckResult& c : checks) {
    out.push_back({{"name", c.name}, {"passed", c.passed}, {"measured", c.measured},
                   {"tolerance", c.tolerance}, {"samples", c.samples}, {"seed", c.seed},
                   {"runtime_ms", c.runtime_ms}, {"detail", c.detail}});
  }
  return {{"checks", out}, {"all_passed", all_passed()}};
}

Matrix<double> fourth_moment_target(const ModelVector& lambda, const Matrix<double>& w) {
  const Matrix<double> l = lambda.asDiagonal();
  return (w * l).trace() * l + 2.0 * l * w * l;
}

Matrix<double> fourth_moment_monte_carlo(const ModelVector& lambda, const Matrix<double>& w,
                                         std::uint64_t samples, Seed seed) {
  const Eigen::Index d = lambda.size();
  if (w.rows() != d || w.cols() != d) throw Error(ErrorKind::kInvalidDimension, "fourth moment: W shape");
  const ModelVector scale = lambda.cwiseSqrt();
  CounterStream stream(seed);
  Matrix<double> sum = Matrix<double>::Zero(d, d);
  ModelVector z(d);
  for (std::uint64_t n = 0; n < samples; ++n) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = scale[i] * stream.next_gaussian();
    const double q = z.dot(w * z);
    sum.noalias() += q * (z * z.transpose());
  }
  return sum / static_cast<double>(samples);
}

double entrywise_relative_error(const Matrix<double>& estimate, const Matrix<double>& target, double floor) {
  const double scale = floor * target.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    for (Eigen::Index j = 0; j < target.cols(); ++j) {
      const double denom = std::max(std::abs(target(i, j)), scale);
      worst = std::max(worst, std::abs(estimate(i, j) - target(i, j)) / denom);
    }
  }
  return worst;
}

MeanEstimate quadratic_delta_mean(const ModelVector& a, const ModelVector& b, const ModelVector& x,
                                  const ModelVector& hessian_diag, double mu,
                                  std::uint64_t samples, Seed seed, std::size_t perturbations) {
  const Eigen::Index d = x.size();
  const auto loss = [&](const ModelVector& v) { return 0.5 * v.dot(a.cwiseProduct(v)) + b.dot(v); };
  const SmoothingParams smoothing{mu};
  const double base = loss(x);
  ModelVector mean = ModelVector::Zero(d);
  ModelVector m2 = ModelVector::Zero(d);
  std::vector<GradScalar> g(perturbations);
  std::vector<Direction> z(perturbations);
  for (std::uint64_t n = 0; n < samples; ++n) {
    for (std::size_t p = 0; p < perturbations; ++p) {
      z[p] = hessian_informed_direction(hessian_diag, gaussian_vector(substream(seed, kTagUnbiased, n, p), d));
      g[p] = rge_scalar(loss, base, x, z[p], smoothing);
    }
    const ModelVector delta = multi_perturbation_delta(g, z);
    // Welford.
    const ModelVector diff = delta - mean;
    mean += diff / static_cast<double>(n + 1);
    m2 += diff.cwiseProduct(delta - mean);
  }
  const ModelVector variance = m2 / static_cast<double>(samples - 1);
  return {mean, (variance / static_cast<double>(samples)).cwiseSqrt()};
}

double max_standard_errors(const MeanEstimate& estimate, const ModelVector& expected) {
  return ((estimate.mean - expected).cwiseAbs().array() / estimate.standard_error.array()).maxCoeff();
}

VerificationReport verify_lemmas(std::size_t dim, std::uint64_t samples, Seed seed) {
  if (dim < 1 || dim > 6) throw ConfigError("dim", "must lie in [1, 6]");
  if (samples < 2) throw ConfigError("samples", "must be >= 2");
  const auto d = static_cast<Eigen::Index>(dim);
  constexpr double kMomentTolerance = 0.03;
  constexpr double kMeanTolerance = 3.0;
  VerificationReport report;

  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    CounterStream s(substream(seed, kTagLemmaPair, i));
    ModelVector lambda(d);
    for (Eigen::Index j = 0; j < d; ++j) lambda[j] = 0.5 + 1.5 * s.next_uniform();
    const Matrix<double> w = random_symmetric(d, s);
    const Seed draws = substream(seed, kTagLemmaDraws, i);
    const double err = entrywise_relative_error(fourth_moment_monte_carlo(lambda, w, samples, draws),
                                                fourth_moment_target(lambda, w));
    std::ostringstream detail;
    detail << "lambda=" << lambda.transpose();
    report.checks.push_back({"lemma1.weighted_pair_" + std::to_string(i), err <= kMomentTolerance, err,
                             kMomentTolerance, samples, draws.value, since_ms(t0), detail.str()});
  }

  {
    const auto t0 = std::chrono::steady_clock::now();
    CounterStream s(substream(seed, kTagLemmaPair, 99));
    const Matrix<double> w = random_symmetric(d, s);
    const Matrix<double> target = w.trace() * Matrix<double>::Identity(d, d) + 2.0 * w;
    const Seed draws = substream(seed, kTagLemmaDraws, 99);
    const double err = entrywise_relative_error(
        fourth_moment_monte_carlo(ModelVector::Ones(d), w, samples, draws), target);
    report.checks.push_back({"lemma1.standard", err <= kMomentTolerance, err, kMomentTolerance, samples,
                             draws.value, since_ms(t0), "target Tr(W) I + 2W"});
  }

  constexpr std::uint64_t kMeanSamples = 100000;
  {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelVector a = (ModelVector(2) << 1.0, 3.0).finished();
    const ModelVector x = ModelVector::Ones(2);
    const Seed draws = substream(seed, kTagUnbiased, 1);
    const MeanEstimate est = quadratic_delta_mean(a, ModelVector::Zero(2), x, ModelVector::Ones(2),
                                                  1e-5, kMeanSamples, draws);
    const double z = max_standard_errors(est, a.cwiseProduct(x));
    std::ostringstream detail;
    detail << "mean=" << est.mean.transpose() << " expected=(1, 3)";
    report.checks.push_back({"lemma2.unbiased", z <= kMeanTolerance, z, kMeanTolerance, kMeanSamples,
                             draws.value, since_ms(t0), detail.str()});
  }
  {
    const auto t0 = std::chrono::steady_clock::now();
    CounterStream s(substream(seed, kTagUnbiased, 2));
    ModelVector a(10), b(10), x(10), h(10);
    for (Eigen::Index j = 0; j < 10; ++j) {
      a[j] = 0.5 + 2.0 * s.next_uniform();
      b[j] = s.next_gaussian();
      x[j] = s.next_gaussian();
      h[j] = 0.25 + 4.0 * s.next_uniform();
    }
    const Seed draws = substream(seed, kTagUnbiased, 3);
    const MeanEstimate est = quadratic_delta_mean(a, b, x, h, 1e-5, kMeanSamples, draws);
    const ModelVector expected = (a.cwiseProduct(x) + b).cwiseQuotient(h);
    const double z = max_standard_errors(est, expected);
    report.checks.push_back({"lemma2.preconditioned", z <= kMeanTolerance, z, kMeanTolerance,
                             kMeanSamples, draws.value, since_ms(t0), "mean delta vs H^-1 grad f, d=10"});
  }
  return report;
}

std::string FuzzCase::describe() const {
  const RoundConfig& c = spec.round;
  std::ostringstream os;
  const bool quadratic = std::holds_alternative<QuadraticSpec>(spec.task);
  const auto d = quadratic ? std::get<QuadraticSpec>(spec.task).dim : std::get<LogisticSpec>(spec.task).dim;
  os << (quadratic ? "quadratic" : "logistic") << " d=" << d << " M=" << c.clients << " m=" << c.sampled
     << " tau=" << c.steps << " P=" << c.perturbations << " R=" << c.rounds << " method=" << to_string(c.method)
     << " nu=" << c.hessian.nu;
  return os.str();
}

FuzzCase fuzz_case(Seed seed) {
  CounterStream s(substream(seed, 401));
  const auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return lo + s.uniform_index(hi - lo + 1); };
  FuzzCase fc;
  RoundConfig& c = fc.spec.round;
  const auto d = static_cast<Eigen::Index>(pick(4, 128));
  c.clients = pick(2, 16);
  c.sampled = pick(1, c.clients);
  c.steps = pick(1, 4);
  c.perturbations = pick(1, 8);
  c.rounds = pick(3, 30);
  c.eta = 5e-4;
  c.smoothing.mu = 1e-3;
  c.method = s.uniform_index(4) == 0 ? Method::kDeComFL : Method::kHiSo;
  c.hessian.nu = s.uniform_index(2) == 0 ? 0.05 : 0.3;
  c.sampling_seed = Seed{s.next_u64()};
  c.perturbation_root = Seed{s.next_u64()};
  if (s.uniform_index(3) == 0) {
    LogisticSpec l;
    l.clients = c.clients;
    l.dim = d;
    l.samples = std::max<std::size_t>(200, 20 * c.clients);
    l.batch_size = 8;
    l.seed = Seed{s.next_u64()};
    c.eta = 0.05;
    fc.spec.task = l;
  } else {
    QuadraticSpec q;
    q.clients = c.clients;
    q.dim = d;
    q.log_variance = 0.5;
    q.dispersion = 0.5;
    q.seed = Seed{s.next_u64()};
    fc.spec.task = q;
  }
  return fc;
}

CheckResult equivalence_check(const RunSpec& spec, const std::string& name) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto task = make_task(spec);
  TraceOptions keep;
  keep.keep_models = true;
  const Trace scalar = run_training(*task, spec.round, keep);
  const Trace vector = vector_oracle_run(*task, spec.round, OracleAggregation::kCoefficientFirst, keep);
  std::int64_t first_divergent = -1;
  for (std::size_t r = 0; r < scalar.models.size(); ++r) {
    if (!bitwise_equal(scalar.models[r], vector.models[r])) {
      first_divergent = static_cast<std::int64_t>(r);
      break;
    }
  }
  const bool hessian_equal = bitwise_equal(scalar.final_hessian.diag(), vector.final_hessian.diag());
  const double gap = max_model_gap(scalar, vector);
  std::ostringstream detail;
  if (first_divergent >= 0) detail << "first divergent round " << first_divergent << "; ";
  if (!hessian_equal) detail << "final curvature differs; ";
  CheckResult out{name, first_divergent < 0 && hessian_equal, gap, 0.0, spec.round.rounds,
                  spec.round.perturbation_root.value, since_ms(t0), detail.str()};
  return out;
}

VerificationReport verify_equivalence(std::size_t count, Seed seed) {
  VerificationReport report;
  for (std::size_t i = 0; i < count; ++i) {
    const Seed case_seed{seed.value + i};
    const FuzzCase fc = fuzz_case(case_seed);
    CheckResult c = equivalence_check(fc.spec, "equivalence.seed_" + std::to_string(case_seed.value));
    c.seed = case_seed.value;
    c.detail = fc.describe() + (c.detail.empty() ? "" : "; " + c.detail);
    report.checks.push_back(std::move(c));
  }
  return report;
}

}  // namespace hiso
