#ifndef HISO_FEDSIM_HPP
#define HISO_FEDSIM_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiso/curvature.hpp"
#include "hiso/ledger.hpp"
#include "hiso/rng.hpp"
#include "hiso/tasks.hpp"
#include "hiso/types.hpp"
#include "hiso/zo.hpp"

namespace hiso {

/// kDeComFL fixes H = I and never runs the EMA.
enum class Method { kHiSo, kDeComFL };

const char* to_string(Method method);
Method parse_method(const std::string& name);

struct RoundConfig {
  std::size_t clients = 8;         // M
  std::size_t sampled = 2;         // m
  std::size_t steps = 1;           // tau
  std::size_t perturbations = 1;   // P
  double eta = 1e-3;
  SmoothingParams smoothing{};
  HessianConfig hessian{};
  std::uint64_t rounds = 10;       // R
  Seed sampling_seed{1};
  Seed perturbation_root{2};
  Method method = Method::kHiSo;
  /// Round client uploads and logged global scalars to float32, as on the wire.
  bool quantize_wire = false;
  WireCost cost{};

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// m distinct ids uniformly without replacement, ascending. Deterministic in
/// (seed, round); independent of the perturbation seeds.
std::vector<ClientId> sample_clients(std::size_t clients, std::size_t sampled, Round round,
                                     Seed seed);

/// A client's replica of the global state. last_round is the round whose
/// start-of-round model `model` holds.
struct ClientState {
  ClientId id = 0;
  ModelVector model;
  DiagHessian hessian;
  Round last_round = 0;
};

struct ServerState {
  ModelVector model;
  DiagHessian hessian;
  Ledger ledger;
  CommMeter meter;
};

/// Advances (model, hessian) through one logged round using global scalars:
/// for each step k, delta_k = (1/P) sum_p g_{k,p} H_t^{-1/2} u_{k,p},
/// model -= eta * delta_k, and the EMA absorbs delta_k. H_t is frozen for the
/// directions of the whole round. Server and rebuilding clients both go
/// through here, which keeps their states bitwise identical.
void replay_round(ModelVector& model, DiagHessian& hessian, const RoundLog& log,
                  const RoundConfig& config, const SeedSchedule& schedule);

/// Replays the missed logs, which must start at client.last_round and be
/// consecutive. Returns the re-synchronized state.
ClientState client_rebuild(ClientState client, std::span<const RoundLog> missed,
                           const RoundConfig& config, const SeedSchedule& schedule);

/// tau local steps from the client's round-start model using its own
/// scalars; the working copy is dropped afterwards, so the client's model is
/// untouched. Returns the tau x P matrix of local scalars.
ScalarGrid client_local_update(const ClientState& client, const Task& task, Round round,
                               const RoundConfig& config, const SeedSchedule& schedule);

struct Aggregate {
  RoundLog log;
  ModelVector model;
  DiagHessian hessian;
};

/// Per-cell mean over clients (ascending id), then one replay_round from the
/// current global state.
Aggregate server_aggregate(std::span<const ScalarGrid> client_scalars, const ModelVector& model,
                           const DiagHessian& hessian, Round round, const RoundConfig& config,
                           const SeedSchedule& schedule);

struct RoundRecord {
  Round round = 0;
  double loss = 0.0;  // global loss after the round's update
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  std::uint64_t cumulative_bytes = 0;
  HessianSummary hessian{};
  std::optional<CurvatureDiagnostics> diagnostics;
  std::uint64_t function_evals = 0;  // all clients, this round
  std::uint64_t rebuild_steps = 0;   // replayed (round, step) pairs, this round
  double wall_ms = 0.0;
  std::vector<ClientId> participants;
};

struct Trace {
  double initial_loss = 0.0;
  std::vector<RoundRecord> rounds;
  /// Global model after each round, when requested.
  std::vector<ModelVector> models;
  ModelVector final_model;
  DiagHessian final_hessian = DiagHessian::identity(1);
  Ledger ledger;
  CommMeter meter;
};

struct TraceOptions {
  bool keep_models = false;
  /// Participation override for tests: returns the sampled ids for a round.
  std::function<std::vector<ClientId>(Round)> participation;
  std::function<void(const RoundRecord&)> on_round;
};

/// The scalar-only protocol: sampling, rebuild, local update with reset,
/// aggregation, ledger, metering.
Trace run_training(const Task& task, const RoundConfig& config, const TraceOptions& options = {});

enum class OracleAggregation {
  /// Fold client scalars per cell before forming vectors; arithmetic order
  /// matches the scalar protocol, so results are bitwise comparable.
  kCoefficientFirst,
  /// Average the clients' full local delta vectors (plain FedAvg on deltas).
  kVectorMean,
};

/// Same algorithm with full-vector synchronization: every sampled client
/// pulls the server's model and curvature, runs its local steps on explicit
/// vectors, and uploads its per-step local deltas. No ledger, no rebuild, no
/// reset replay.
Trace vector_oracle_run(const Task& task, const RoundConfig& config,
                        OracleAggregation aggregation = OracleAggregation::kCoefficientFirst,
                        const TraceOptions& options = {});

/// max over rounds of ||a_r - b_r||_inf; both traces need keep_models.
double max_model_gap(const Trace& a, const Trace& b);

}  // namespace hiso

#endif  // HISO_FEDSIM_HPP
