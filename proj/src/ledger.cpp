#include "hiso/ledger.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "hiso/error.hpp"

namespace hiso {

Seed RoundLog::seed(const SeedSchedule& schedule, std::size_t k, std::size_t p) const {
  if (seeds) return (*seeds)[k * perturbations() + p];
  return schedule.derive(round, k, p);
}

bool operator==(const RoundLog& a, const RoundLog& b) {
  if (a.round != b.round || a.seeds != b.seeds) return false;
  if (a.scalars.rows() != b.scalars.rows() || a.scalars.cols() != b.scalars.cols()) return false;
  // Bitwise, so that -0.0 and NaN payloads survive a round trip check.
  return std::memcmp(a.scalars.data(), b.scalars.data(),
                     sizeof(double) * static_cast<std::size_t>(a.scalars.size())) == 0;
}

Round Ledger::last_participation(ClientId client) const {
  const auto it = last_participation_.find(client);
  return it == last_participation_.end() ? 0 : it->second;
}

void Ledger::record(RoundLog log, std::span<const ClientId> participants) {
  if (log.round != current_round()) {
    throw Error(ErrorKind::kProtocolOrder, "ledger: expected round " +
                                               std::to_string(current_round()) + ", got " +
                                               std::to_string(log.round));
  }
  if (log.steps() != header_.steps || log.perturbations() != header_.perturbations) {
    throw Error(ErrorKind::kShapeMismatch, "ledger: scalar grid shape differs from header");
  }
  if (log.seeds && log.seeds->size() != log.steps() * log.perturbations()) {
    throw Error(ErrorKind::kShapeMismatch, "ledger: seed override size differs from grid");
  }
  if (!log.scalars.allFinite()) {
    throw Error(ErrorKind::kEstimatorFailure, "ledger: non-finite gradient scalar");
  }
  const Round r = log.round;
  logs_.push_back(std::move(log));
  for (ClientId id : participants) last_participation_[id] = r;
}

std::span<const RoundLog> Ledger::fetch_since(Round since) const {
  if (since > current_round()) {
    throw Error(ErrorKind::kRange, "ledger: fetch from round " + std::to_string(since) +
                                       " beyond current round " +
                                       std::to_string(current_round()));
  }
  return std::span<const RoundLog>(logs_).subspan(static_cast<std::size_t>(since));
}

Ledger record_round(Ledger ledger, RoundLog log, std::span<const ClientId> participants) {
  ledger.record(std::move(log), participants);
  return ledger;
}

std::span<const RoundLog> fetch_since(const Ledger& ledger, Round since) {
  return ledger.fetch_since(since);
}

// Serialization

namespace {

constexpr char kMagic[8] = {'H', 'I', 'S', 'O', 'L', 'D', 'G', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagSeeds = 1;

class Writer {
 public:
  void put(std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out_.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xff));
  }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out_.push_back(static_cast<std::byte>(s[i]));
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  std::uint64_t get(int bytes, const char* what) {
    if (in_.size() - pos_ < static_cast<std::size_t>(bytes)) {
      throw ParseError(pos_, std::string("truncated stream reading ") + what);
    }
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) {
      v |= static_cast<std::uint64_t>(std::to_integer<unsigned>(in_[pos_ + b])) << (8 * b);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(const char* what) { return get(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(get(8, what)); }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> serialize(const Ledger& ledger) {
  Writer w;
  const LedgerHeader& h = ledger.header();
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(0);
  w.u64(h.dim);
  w.u32(h.steps);
  w.u32(h.perturbations);
  w.u64(h.root.value);
  w.u64(ledger.current_round());
  for (const RoundLog& log : ledger.logs()) {
    w.u64(log.round);
    w.u32(log.seeds ? kFlagSeeds : 0);
    w.u32(0);
    for (Eigen::Index i = 0; i < log.scalars.size(); ++i) w.f64(log.scalars.data()[i]);
    if (log.seeds) {
      for (Seed s : *log.seeds) w.u64(s.value);
    }
  }
  w.u64(ledger.participation().size());
  for (const auto& [client, round] : ledger.participation()) {
    w.u32(client);
    w.u64(round);
  }
  return w.take();
}

Ledger deserialize(std::span<const std::byte> bytes) {
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) {
    const auto c = static_cast<char>(r.get(1, "magic"));
    if (c != kMagic[i]) throw ParseError(i, "bad magic");
  }
  const std::size_t version_at = r.pos();
  if (r.u32("version") != kVersion) throw ParseError(version_at, "unsupported version");
  r.u32("reserved");
  LedgerHeader header;
  header.dim = r.u64("dim");
  const std::size_t shape_at = r.pos();
  header.steps = r.u32("steps");
  header.perturbations = r.u32("perturbations");
  if (header.steps == 0 || header.perturbations == 0) {
    throw ParseError(shape_at, "empty scalar grid");
  }
  header.root = Seed{r.u64("root seed")};
  const std::uint64_t rounds = r.u64("round count");

  const std::size_t cells = static_cast<std::size_t>(header.steps) * header.perturbations;
  // Cheap bound before allocating: each round needs at least 16 + 8 * cells bytes.
  if (rounds > r.remaining() / (16 + 8 * cells)) {
    throw ParseError(r.pos(), "round count exceeds stream length");
  }

  Ledger ledger(header);
  std::vector<RoundLog> logs;
  logs.reserve(static_cast<std::size_t>(rounds));
  for (std::uint64_t i = 0; i < rounds; ++i) {
    const std::size_t record_at = r.pos();
    RoundLog log;
    log.round = r.u64("round index");
    if (log.round != i) throw ParseError(record_at, "round records out of order");
    const std::size_t flags_at = r.pos();
    const std::uint32_t flags = r.u32("round flags");
    if ((flags & ~kFlagSeeds) != 0) throw ParseError(flags_at, "unknown round flags");
    r.u32("reserved");
    log.scalars.resize(header.steps, header.perturbations);
    for (std::size_t c = 0; c < cells; ++c) {
      const std::size_t at = r.pos();
      const double v = r.f64("scalar");
      if (!std::isfinite(v)) throw ParseError(at, "non-finite scalar");
      log.scalars.data()[c] = v;
    }
    if (flags & kFlagSeeds) {
      std::vector<Seed> seeds(cells);
      for (Seed& s : seeds) s.value = r.u64("seed");
      log.seeds = std::move(seeds);
    }
    logs.push_back(std::move(log));
  }
  const std::uint64_t count = r.u64("participant count");
  if (count > r.remaining() / 12) throw ParseError(r.pos(), "participant count exceeds stream length");
  std::vector<std::pair<ClientId, Round>> participation;
  for (std::uint64_t i = 0; i < count; ++i) {
    const ClientId client = r.u32("client id");
    const std::size_t at = r.pos();
    const Round round = r.u64("participation round");
    if (round > rounds) throw ParseError(at, "participation round beyond ledger");
    participation.emplace_back(client, round);
  }
  if (r.remaining() != 0) throw ParseError(r.pos(), "trailing bytes");

  for (RoundLog& log : logs) ledger.record(std::move(log), {});
  for (const auto& [client, round] : participation) ledger.last_participation_[client] = round;
  return ledger;
}

double CommMeter::per_client_bytes() const noexcept {
  if (participations_ == 0) return 0.0;
  return static_cast<double>(total_bytes()) * static_cast<double>(rounds_) /
         static_cast<double>(participations_);
}

void CommMeter::add_round(std::size_t tau, std::size_t perturbations,
                          std::span<const std::uint64_t> missed_logs_per_client) {
  const std::uint64_t cells = static_cast<std::uint64_t>(tau) * perturbations;
  const std::uint64_t m = missed_logs_per_client.size();
  uplink_ += m * cells * cost_.bytes_per_scalar;
  for (std::uint64_t missed : missed_logs_per_client) {
    downlink_ += missed * cells * cost_.bytes_per_scalar + (missed + 1) * cells * cost_.bytes_per_seed;
  }
  rounds_ += 1;
  participations_ += m;
}

CommMeter meter_round(CommMeter meter, std::size_t tau, std::size_t perturbations,
                      std::span<const std::uint64_t> missed_logs_per_client) {
  meter.add_round(tau, perturbations, missed_logs_per_client);
  return meter;
}

}  // namespace hiso
