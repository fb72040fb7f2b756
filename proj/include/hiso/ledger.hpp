#ifndef HISO_LEDGER_HPP
#define HISO_LEDGER_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hiso/rng.hpp"
#include "hiso/types.hpp"

namespace hiso {

/// Everything that crosses the wire for one round: the aggregated gradient
/// scalars, indexed (local step k, perturbation p).
struct RoundLog {
  Round round = 0;
  ScalarGrid scalars;
  /// Explicit tau*P seeds (row-major), present only when the run overrides
  /// the shared schedule.
  std::optional<std::vector<Seed>> seeds;

  std::size_t steps() const noexcept { return static_cast<std::size_t>(scalars.rows()); }
  std::size_t perturbations() const noexcept { return static_cast<std::size_t>(scalars.cols()); }

  /// Seed for cell (k, p): the override if present, else the schedule.
  Seed seed(const SeedSchedule& schedule, std::size_t k, std::size_t p) const;

  friend bool operator==(const RoundLog& a, const RoundLog& b);
};

/// Run-level constants recorded in the ledger file header.
struct LedgerHeader {
  std::uint64_t dim = 0;
  std::uint32_t steps = 1;
  std::uint32_t perturbations = 1;
  Seed root{};

  friend bool operator==(const LedgerHeader&, const LedgerHeader&) = default;
};

/// Server-side history of round logs plus each client's last participation.
/// Logs cover [0, current_round()) with no gaps.
class Ledger {
 public:
  Ledger() = default;
  explicit Ledger(LedgerHeader header) : header_(header) {}

  const LedgerHeader& header() const noexcept { return header_; }
  Round current_round() const noexcept { return logs_.size(); }
  std::span<const RoundLog> logs() const noexcept { return logs_; }
  const std::map<ClientId, Round>& participation() const noexcept { return last_participation_; }

  /// Last round the client took part in; 0 for clients never seen, matching
  /// the all-zero initialization of participation rounds.
  Round last_participation(ClientId client) const;

  /// Appends the next round. Throws kProtocolOrder when log.round is not
  /// current_round(), kShapeMismatch when the grid disagrees with the header.
  void record(RoundLog log, std::span<const ClientId> participants);

  /// Logs with round in [since, current_round()), ascending. Throws kRange
  /// when since > current_round().
  std::span<const RoundLog> fetch_since(Round since) const;

  friend bool operator==(const Ledger&, const Ledger&) = default;
  friend Ledger deserialize(std::span<const std::byte> bytes);

 private:
  LedgerHeader header_{};
  std::vector<RoundLog> logs_;
  std::map<ClientId, Round> last_participation_;
};

Ledger record_round(Ledger ledger, RoundLog log, std::span<const ClientId> participants);
std::span<const RoundLog> fetch_since(const Ledger& ledger, Round since);

/// Binary ledger file. Little-endian throughout:
///
///   magic "HISOLDG1" | u32 version | u32 reserved | u64 dim | u32 steps |
///   u32 perturbations | u64 root seed | u64 round count
///   per round:  u64 round | u32 flags (bit 0: seeds follow) | u32 reserved |
///               steps*perturbations f64 scalars, row-major |
///               [steps*perturbations u64 seeds]
///   u64 participant count, then per participant: u32 client | u64 round
std::vector<std::byte> serialize(const Ledger& ledger);

/// Throws ParseError with the byte offset of the first malformed field.
/// Never returns a partial ledger.
Ledger deserialize(std::span<const std::byte> bytes);

/// Bytes per wire element.
struct WireCost {
  std::uint32_t bytes_per_scalar = 4;
  std::uint32_t bytes_per_seed = 0;

  friend bool operator==(WireCost, WireCost) = default;
};

/// Uplink/downlink byte counters. Monotone.
class CommMeter {
 public:
  CommMeter() = default;
  explicit CommMeter(WireCost cost) : cost_(cost) {}

  const WireCost& cost() const noexcept { return cost_; }
  std::uint64_t uplink_bytes() const noexcept { return uplink_; }
  std::uint64_t downlink_bytes() const noexcept { return downlink_; }
  std::uint64_t total_bytes() const noexcept { return uplink_ + downlink_; }
  std::uint64_t rounds() const noexcept { return rounds_; }
  /// Sum over rounds of the number of sampled clients.
  std::uint64_t participations() const noexcept { return participations_; }

  /// Traffic seen by one participating client over the run: total bytes
  /// divided by the mean number of clients per round. This is the quantity
  /// tabulated as per-method communication cost.
  double per_client_bytes() const noexcept;

  /// Adds one round: uplink m*tau*P scalars; downlink, per sampled client,
  /// missed*tau*P scalars plus (missed + 1)*tau*P seeds under the cost model.
  void add_round(std::size_t tau, std::size_t perturbations,
                 std::span<const std::uint64_t> missed_logs_per_client);

  friend bool operator==(const CommMeter&, const CommMeter&) = default;

 private:
  WireCost cost_{};
  std::uint64_t uplink_ = 0;
  std::uint64_t downlink_ = 0;
  std::uint64_t rounds_ = 0;
  std::uint64_t participations_ = 0;
};

/// Value-returning form; m is missed_logs_per_client.size().
CommMeter meter_round(CommMeter meter, std::size_t tau, std::size_t perturbations,
                      std::span<const std::uint64_t> missed_logs_per_client);

}  // namespace hiso

#endif  // HISO_LEDGER_HPP
