#include "hiso/fedsim.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>

#include "hiso/error.hpp"

namespace hiso {

namespace {

constexpr std::uint64_t kTagSampling = 201;
constexpr std::uint64_t kTagBatch = 202;

Seed batch_seed(const RoundConfig& config, ClientId client, Round round, std::size_t step) {
  return substream(config.sampling_seed, kTagBatch, client, (round << 16) | step);
}

Direction make_direction(const RoundConfig& config, const DiagHessian& hessian, ModelVector u) {
  if (config.method == Method::kDeComFL) return Direction{std::move(u)};
  return hessian_informed_direction(hessian, u);
}

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize_grid(ScalarGrid& grid) { grid = grid.unaryExpr(&quantize); }

void check_grid_shape(const ScalarGrid& grid, const RoundConfig& config, const char* who) {
  if (static_cast<std::size_t>(grid.rows()) != config.steps ||
      static_cast<std::size_t>(grid.cols()) != config.perturbations) {
    throw Error(ErrorKind::kShapeMismatch, std::string(who) + ": scalar grid is not tau x P");
  }
}

std::vector<ClientId> participants_for(Round r, const RoundConfig& config,
                                       const TraceOptions& options) {
  if (!options.participation) {
    return sample_clients(config.clients, config.sampled, r, config.sampling_seed);
  }
  std::vector<ClientId> ids = options.participation(r);
  if (ids.empty()) throw Error(ErrorKind::kInvalidArgument, "participation override: empty round");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= config.clients || (i > 0 && ids[i] <= ids[i - 1])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "participation override: ids must be ascending, distinct and < M");
    }
  }
  return ids;
}

RoundRecord make_record(Round r, const Task& task, const ModelVector& model,
                        const DiagHessian& hessian, const std::optional<ModelVector>& curvature) {
  RoundRecord rec;
  rec.round = r;
  rec.loss = task.global_loss(model);
  rec.hessian = summarize(hessian);
  if (curvature) rec.diagnostics = diagnostics(hessian, *curvature, curvature->maxCoeff());
  return rec;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

const char* to_string(Method method) {
  return method == Method::kHiSo ? "hiso" : "decomfl";
}

Method parse_method(const std::string& name) {
  if (name == "hiso") return Method::kHiSo;
  if (name == "decomfl") return Method::kDeComFL;
  throw ConfigError("method", "expected \"hiso\" or \"decomfl\", got \"" + name + "\"");
}

void RoundConfig::validate() const {
  if (clients < 1) throw ConfigError("M", "must be >= 1");
  if (sampled < 1 || sampled > clients) throw ConfigError("m", "must satisfy 1 <= m <= M");
  if (steps < 1) throw ConfigError("tau", "must be >= 1");
  if (perturbations < 1) throw ConfigError("P", "must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta", "must be finite and >= 0");
  if (rounds < 1) throw ConfigError("R", "must be >= 1");
  if (cost.bytes_per_scalar < 1) throw ConfigError("bytes_per_scalar", "must be >= 1");
  smoothing.validate();
  hessian.validate();
}

std::vector<ClientId> sample_clients(std::size_t clients, std::size_t sampled, Round round,
                                     Seed seed) {
  if (sampled < 1 || sampled > clients) {
    throw Error(ErrorKind::kInvalidArgument, "sample_clients: need 1 <= m <= M");
  }
  std::vector<ClientId> pool(clients);
  std::iota(pool.begin(), pool.end(), ClientId{0});
  CounterStream stream(substream(seed, kTagSampling, round));
  // Partial Fisher-Yates: the first m slots are a uniform m-subset.
  for (std::size_t i = 0; i < sampled; ++i) {
    const auto j = i + static_cast<std::size_t>(stream.uniform_index(clients - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(sampled);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void replay_round(ModelVector& model, DiagHessian& hessian, const RoundLog& log,
                  const RoundConfig& config, const SeedSchedule& schedule) {
  check_grid_shape(log.scalars, config, "replay_round");
  const Eigen::Index d = model.size();
  if (hessian.dim() != d) throw Error(ErrorKind::kInvalidDimension, "replay_round: curvature size");
  const DiagHessian frozen = hessian;
  std::vector<GradScalar> g(config.perturbations);
  std::vector<Direction> z(config.perturbations);
  for (std::size_t k = 0; k < config.steps; ++k) {
    for (std::size_t p = 0; p < config.perturbations; ++p) {
      g[p] = GradScalar{log.scalars(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p))};
      z[p] = make_direction(config, frozen, gaussian_vector(log.seed(schedule, k, p), d));
    }
    const ModelVector delta = multi_perturbation_delta(g, z);
    model -= config.eta * delta;
    if (config.method == Method::kHiSo) hessian = ema_update(hessian, delta);
  }
}

ClientState client_rebuild(ClientState client, std::span<const RoundLog> missed,
                           const RoundConfig& config, const SeedSchedule& schedule) {
  for (std::size_t i = 0; i < missed.size(); ++i) {
    if (missed[i].round != client.last_round + i) {
      throw Error(ErrorKind::kProtocolOrder, "client_rebuild: missed rounds are not contiguous from " +
                                                 std::to_string(client.last_round));
    }
    check_grid_shape(missed[i].scalars, config, "client_rebuild");
  }
  for (const RoundLog& log : missed) {
    replay_round(client.model, client.hessian, log, config, schedule);
  }
  client.last_round += missed.size();
  return client;
}

ScalarGrid client_local_update(const ClientState& client, const Task& task, Round round,
                               const RoundConfig& config, const SeedSchedule& schedule) {
  const Eigen::Index d = task.dim();
  if (client.model.size() != d) throw Error(ErrorKind::kInvalidDimension, "client_local_update: model size");
  ModelVector x = client.model;  // x_{r,0}; discarded at the end (reset)
  ScalarGrid grid(static_cast<Eigen::Index>(config.steps), static_cast<Eigen::Index>(config.perturbations));
  std::vector<GradScalar> g(config.perturbations);
  std::vector<Direction> z(config.perturbations);
  for (std::size_t k = 0; k < config.steps; ++k) {
    const Batch batch = task.sample_batch(client.id, batch_seed(config, client.id, round, k));
    const auto loss = [&](const ModelVector& v) { return task.loss(batch, v); };
    const double base = loss(x);
    for (std::size_t p = 0; p < config.perturbations; ++p) {
      z[p] = make_direction(config, client.hessian, gaussian_vector(schedule.derive(round, k, p), d));
      try {
        g[p] = rge_scalar(loss, base, x, z[p], config.smoothing);
      } catch (const EstimatorFailure& e) {
        throw e.at(static_cast<std::int64_t>(round), static_cast<std::int64_t>(k),
                   static_cast<std::int64_t>(p));
      }
      grid(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) = g[p].value;
    }
    x -= config.eta * multi_perturbation_delta(g, z);
  }
  return grid;
}

Aggregate server_aggregate(std::span<const ScalarGrid> client_scalars, const ModelVector& model,
                           const DiagHessian& hessian, Round round, const RoundConfig& config,
                           const SeedSchedule& schedule) {
  if (client_scalars.empty()) throw Error(ErrorKind::kShapeMismatch, "server_aggregate: no clients");
  for (const ScalarGrid& grid : client_scalars) check_grid_shape(grid, config, "server_aggregate");
  ScalarGrid mean = client_scalars[0];
  for (std::size_t i = 1; i < client_scalars.size(); ++i) mean += client_scalars[i];
  if (client_scalars.size() > 1) mean /= static_cast<double>(client_scalars.size());
  if (config.quantize_wire) quantize_grid(mean);

  Aggregate out{RoundLog{round, std::move(mean), std::nullopt}, model, hessian};
  replay_round(out.model, out.hessian, out.log, config, schedule);
  return out;
}

Trace run_training(const Task& task, const RoundConfig& config, const TraceOptions& options) {
  config.validate();
  if (task.num_clients() != config.clients) {
    throw ConfigError("M", "task has " + std::to_string(task.num_clients()) + " clients");
  }
  const SeedSchedule schedule(config.perturbation_root);
  schedule.check_grid(config.rounds, config.steps, config.perturbations);

  const Eigen::Index d = task.dim();
  const ModelVector x0 = task.initial_point();
  const DiagHessian h0 = DiagHessian::identity(d, config.hessian);
  const std::optional<ModelVector> curvature = task.true_curvature();

  ServerState server{x0, h0,
                     Ledger(LedgerHeader{static_cast<std::uint64_t>(d),
                                         static_cast<std::uint32_t>(config.steps),
                                         static_cast<std::uint32_t>(config.perturbations),
                                         config.perturbation_root}),
                     CommMeter(config.cost)};
  std::vector<ClientState> clients;
  clients.reserve(config.clients);
  for (std::size_t i = 0; i < config.clients; ++i) {
    clients.push_back(ClientState{static_cast<ClientId>(i), x0, h0, 0});
  }

  Trace trace;
  trace.initial_loss = task.global_loss(x0);
  for (Round r = 0; r < config.rounds; ++r) {
    const auto started = std::chrono::steady_clock::now();
    try {
      const std::vector<ClientId> ids = participants_for(r, config, options);
      std::vector<std::uint64_t> missed_counts;
      std::vector<ScalarGrid> uploads;
      std::uint64_t rebuild_steps = 0;
      for (ClientId id : ids) {
        ClientState& client = clients[id];
        const auto missed = server.ledger.fetch_since(client.last_round);
        missed_counts.push_back(missed.size());
        rebuild_steps += missed.size() * config.steps;
        client = client_rebuild(std::move(client), missed, config, schedule);
        ScalarGrid grid = client_local_update(client, task, r, config, schedule);
        if (config.quantize_wire) quantize_grid(grid);
        uploads.push_back(std::move(grid));
      }
      Aggregate agg = server_aggregate(uploads, server.model, server.hessian, r, config, schedule);
      server.model = std::move(agg.model);
      server.hessian = std::move(agg.hessian);
      server.ledger.record(std::move(agg.log), ids);
      const std::uint64_t up_before = server.meter.uplink_bytes();
      const std::uint64_t down_before = server.meter.downlink_bytes();
      server.meter.add_round(config.steps, config.perturbations, missed_counts);

      RoundRecord rec = make_record(r, task, server.model, server.hessian, curvature);
      rec.uplink_bytes = server.meter.uplink_bytes() - up_before;
      rec.downlink_bytes = server.meter.downlink_bytes() - down_before;
      rec.cumulative_bytes = server.meter.total_bytes();
      rec.function_evals = ids.size() * config.steps * (1 + config.perturbations);
      rec.rebuild_steps = rebuild_steps;
      rec.participants = ids;
      rec.wall_ms = elapsed_ms(started);
      if (options.on_round) options.on_round(rec);
      trace.rounds.push_back(std::move(rec));
      if (options.keep_models) trace.models.push_back(server.model);
    } catch (const EstimatorFailure&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw Error(e.kind(), "round " + std::to_string(r) + ": " + e.what());
    }
  }
  trace.final_model = server.model;
  trace.final_hessian = server.hessian;
  trace.ledger = std::move(server.ledger);
  trace.meter = server.meter;
  return trace;
}

namespace {

struct OracleUpload {
  ScalarGrid scalars;
  std::vector<ModelVector> deltas;  // local delta per step
};

// Local steps on an explicit copy of the pulled global model.
OracleUpload oracle_local(const Task& task, ClientId id, const ModelVector& global,
                          const DiagHessian& hessian, Round round, const RoundConfig& config,
                          const SeedSchedule& schedule) {
  const Eigen::Index d = task.dim();
  ModelVector x = global;
  OracleUpload up{ScalarGrid(static_cast<Eigen::Index>(config.steps),
                             static_cast<Eigen::Index>(config.perturbations)),
                  {}};
  std::vector<GradScalar> g(config.perturbations);
  std::vector<Direction> z(config.perturbations);
  for (std::size_t k = 0; k < config.steps; ++k) {
    const Batch batch = task.sample_batch(id, batch_seed(config, id, round, k));
    const auto loss = [&](const ModelVector& v) { return task.loss(batch, v); };
    const double base = loss(x);
    for (std::size_t p = 0; p < config.perturbations; ++p) {
      z[p] = make_direction(config, hessian, gaussian_vector(schedule.derive(round, k, p), d));
      g[p] = rge_scalar(loss, base, x, z[p], config.smoothing);
      up.scalars(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) = g[p].value;
    }
    ModelVector delta = multi_perturbation_delta(g, z);
    x -= config.eta * delta;
    up.deltas.push_back(std::move(delta));
  }
  return up;
}

}  // namespace

Trace vector_oracle_run(const Task& task, const RoundConfig& config, OracleAggregation aggregation,
                        const TraceOptions& options) {
  config.validate();
  if (task.num_clients() != config.clients) {
    throw ConfigError("M", "task has " + std::to_string(task.num_clients()) + " clients");
  }
  const SeedSchedule schedule(config.perturbation_root);
  const Eigen::Index d = task.dim();
  const std::optional<ModelVector> curvature = task.true_curvature();
  const std::uint64_t bps = config.cost.bytes_per_scalar;

  ModelVector x = task.initial_point();
  DiagHessian hessian = DiagHessian::identity(d, config.hessian);
  Trace trace;
  trace.initial_loss = task.global_loss(x);
  std::uint64_t cumulative = 0;
  for (Round r = 0; r < config.rounds; ++r) {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<ClientId> ids = participants_for(r, config, options);
    std::vector<OracleUpload> uploads;
    for (ClientId id : ids) uploads.push_back(oracle_local(task, id, x, hessian, r, config, schedule));

    const DiagHessian frozen = hessian;
    const auto m = static_cast<double>(ids.size());
    for (std::size_t k = 0; k < config.steps; ++k) {
      ModelVector delta;
      if (aggregation == OracleAggregation::kVectorMean) {
        delta = uploads[0].deltas[k];
        for (std::size_t i = 1; i < uploads.size(); ++i) delta += uploads[i].deltas[k];
        if (uploads.size() > 1) delta /= m;
      } else {
        const auto row = static_cast<Eigen::Index>(k);
        std::vector<GradScalar> g(config.perturbations);
        std::vector<Direction> z(config.perturbations);
        for (std::size_t p = 0; p < config.perturbations; ++p) {
          const auto col = static_cast<Eigen::Index>(p);
          double sum = uploads[0].scalars(row, col);
          for (std::size_t i = 1; i < uploads.size(); ++i) sum += uploads[i].scalars(row, col);
          g[p] = GradScalar{uploads.size() > 1 ? sum / m : sum};
          z[p] = make_direction(config, frozen, gaussian_vector(schedule.derive(r, k, p), d));
        }
        delta = multi_perturbation_delta(g, z);
      }
      x -= config.eta * delta;
      if (config.method == Method::kHiSo) hessian = ema_update(hessian, delta);
    }

    RoundRecord rec = make_record(r, task, x, hessian, curvature);
    rec.uplink_bytes = ids.size() * config.steps * static_cast<std::uint64_t>(d) * bps;
    rec.downlink_bytes = ids.size() * static_cast<std::uint64_t>(d) * bps;
    cumulative += rec.uplink_bytes + rec.downlink_bytes;
    rec.cumulative_bytes = cumulative;
    rec.function_evals = ids.size() * config.steps * (1 + config.perturbations);
    rec.participants = ids;
    rec.wall_ms = elapsed_ms(started);
    if (options.on_round) options.on_round(rec);
    trace.rounds.push_back(std::move(rec));
    if (options.keep_models) trace.models.push_back(x);
  }
  trace.final_model = x;
  trace.final_hessian = hessian;
  return trace;
}

double max_model_gap(const Trace& a, const Trace& b) {
  if (a.models.size() != b.models.size()) {
    throw Error(ErrorKind::kShapeMismatch, "max_model_gap: traces differ in length or lack models");
  }
  double gap = 0.0;
  for (std::size_t r = 0; r < a.models.size(); ++r) {
    gap = std::max(gap, (a.models[r] - b.models[r]).lpNorm<Eigen::Infinity>());
  }
  return gap;
}

}  // namespace hiso
