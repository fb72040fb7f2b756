#include "hiso/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hiso/error.hpp"
#include "hiso/metrics_io.hpp"

namespace hiso {

std::optional<std::uint64_t> rounds_to_threshold(const Trace& trace, double threshold) {
  for (std::size_t i = 0; i < trace.rounds.size(); ++i) {
    if (trace.rounds[i].loss <= threshold) return i + 1;
  }
  return std::nullopt;
}

double relative_range(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*lo > 0.0)) throw Error(ErrorKind::kRange, "relative_range: values must be positive");
  return (*hi - *lo) / *lo;
}

namespace {

// A diverging step size ends in an estimator failure; treat it as "no result".
std::optional<Trace> try_run(const Task& task, const RoundConfig& config) {
  try {
    return run_training(task, config);
  } catch (const EstimatorFailure&) {
    return std::nullopt;
  }
}

}  // namespace

AccelerationResult acceleration_experiment(const AccelerationSetup& setup) {
  QuadraticSpec spec = setup.task;
  spec.clients = setup.base.clients;
  const QuadraticTask task = QuadraticTask::make(spec);
  AccelerationResult out;
  out.initial_loss = task.global_loss(task.initial_point());
  const double goal = out.initial_loss / setup.reduction;

  std::optional<std::uint64_t> best_rounds;
  for (double eta : setup.decomfl_etas) {
    RoundConfig c = setup.base;
    c.method = Method::kDeComFL;
    c.eta = eta;
    c.rounds = setup.max_rounds;
    const auto trace = try_run(task, c);
    if (!trace) continue;
    const auto hit = rounds_to_threshold(*trace, goal);
    if (hit && (!best_rounds || *hit < *best_rounds)) {
      best_rounds = hit;
      out.decomfl_eta = eta;
      out.target_loss = trace->rounds[*hit - 1].loss;
    }
  }
  if (!best_rounds) return out;
  out.decomfl_rounds = *best_rounds;

  out.hiso_loss_at_r = std::numeric_limits<double>::infinity();
  const std::uint64_t half = out.decomfl_rounds / 2;
  for (double eta : setup.hiso_etas) {
    RoundConfig c = setup.base;
    c.method = Method::kHiSo;
    c.eta = eta;
    c.rounds = out.decomfl_rounds;
    const auto trace = try_run(task, c);
    if (!trace) continue;
    const double final_loss = trace->rounds.back().loss;
    if (final_loss < out.hiso_loss_at_r) {
      out.hiso_loss_at_r = final_loss;
      out.hiso_eta = eta;
    }
    const auto hit = rounds_to_threshold(*trace, out.target_loss);
    if (hit && (!out.hiso_rounds || *hit < *out.hiso_rounds)) out.hiso_rounds = hit;
  }
  out.passed = out.hiso_rounds.has_value() && *out.hiso_rounds <= half;
  return out;
}

std::vector<SweepRow> run_sweep(const RunSpec& base, const SweepGrid& grid) {
  if (grid.size() > grid.budget) {
    throw ConfigError("sweep", "grid has " + std::to_string(grid.size()) + " runs, budget is " +
                                   std::to_string(grid.budget));
  }
  const RoundConfig& b = base.round;
  const std::vector<double> nus = grid.nu.value_or(std::vector<double>{b.hessian.nu});
  const std::vector<std::size_t> taus = grid.tau.value_or(std::vector<std::size_t>{b.steps});
  const std::vector<std::size_t> ps =
      grid.perturbations.value_or(std::vector<std::size_t>{b.perturbations});
  const std::vector<double> etas = grid.eta.value_or(std::vector<double>{b.eta});

  const auto task = make_task(base);
  std::vector<SweepRow> rows;
  for (double nu : nus) {
    for (std::size_t tau : taus) {
      for (std::size_t p : ps) {
        for (double eta : etas) {
          RoundConfig c = b;
          c.hessian.nu = nu;
          c.steps = tau;
          c.perturbations = p;
          c.eta = eta;
          c.validate();
          const Trace trace = run_training(*task, c);
          SweepRow row;
          row.nu = nu;
          row.tau = tau;
          row.perturbations = p;
          row.eta = eta;
          row.method = c.method;
          row.initial_loss = trace.initial_loss;
          row.final_loss = trace.rounds.empty() ? trace.initial_loss : trace.rounds.back().loss;
          row.rounds_to_threshold = rounds_to_threshold(trace, grid.threshold_fraction * trace.initial_loss);
          row.total_bytes = trace.meter.total_bytes();
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

std::string sweep_csv_row(const SweepRow& row) {
  std::string s = to_string(row.method);
  s += ',' + format_double(row.nu) + ',' + std::to_string(row.tau) + ',' +
       std::to_string(row.perturbations) + ',' + format_double(row.eta) + ',' +
       format_double(row.initial_loss) + ',' + format_double(row.final_loss) + ',';
  if (row.rounds_to_threshold) s += std::to_string(*row.rounds_to_threshold);
  s += ',' + std::to_string(row.total_bytes);
  return s;
}

}  // namespace hiso
