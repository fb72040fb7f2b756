#ifndef HISO_EXPERIMENTS_HPP
#define HISO_EXPERIMENTS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hiso/fedsim.hpp"
#include "hiso/run_spec.hpp"
#include "hiso/tasks.hpp"

namespace hiso {

/// Rounds (1-based count) until the trace's loss first reaches `threshold`.
std::optional<std::uint64_t> rounds_to_threshold(const Trace& trace, double threshold);

/// (max - min) / min over positive values.
double relative_range(const std::vector<double>& values);

struct AccelerationSetup {
  QuadraticSpec task{};
  RoundConfig base{};
  std::vector<double> decomfl_etas;
  std::vector<double> hiso_etas;
  double reduction = 10.0;        // DeComFL must cut the initial loss by this factor
  std::uint64_t max_rounds = 5000;
};

struct AccelerationResult {
  double initial_loss = 0.0;
  std::uint64_t decomfl_rounds = 0;   // R
  double decomfl_eta = 0.0;
  double target_loss = 0.0;           // DeComFL's loss at round R
  std::optional<std::uint64_t> hiso_rounds;
  double hiso_eta = 0.0;
  double hiso_loss_at_r = 0.0;        // best HiSo loss after R rounds
  bool passed = false;
};

/// Picks R as the first round at which the best DeComFL step size cuts the
/// loss by `reduction`, then asks whether any HiSo step size reaches that
/// loss within R/2 rounds.
AccelerationResult acceleration_experiment(const AccelerationSetup& setup);

struct SweepRow {
  double nu = 0.0;
  std::size_t tau = 1;
  std::size_t perturbations = 1;
  double eta = 0.0;
  Method method = Method::kHiSo;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::optional<std::uint64_t> rounds_to_threshold;
  std::uint64_t total_bytes = 0;
};

inline constexpr const char* kSweepHeader =
    "method,nu,tau,P,eta,initial_loss,final_loss,rounds_to_threshold,total_bytes";

/// Cross product of the grid over the base spec. Throws ConfigError("sweep")
/// when the grid exceeds its budget.
std::vector<SweepRow> run_sweep(const RunSpec& base, const SweepGrid& grid);

std::string sweep_csv_row(const SweepRow& row);

}  // namespace hiso

#endif  // HISO_EXPERIMENTS_HPP
