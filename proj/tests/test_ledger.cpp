#include <doctest.h>

#include <cstring>
#include <map>

#include "hiso/error.hpp"
#include "hiso/ledger.hpp"
#include "hiso/rng.hpp"

using namespace hiso;

namespace {

RoundLog make_log(Round r, Eigen::Index tau, Eigen::Index p, double base = 0.0) {
  RoundLog log{r, ScalarGrid(tau, p), std::nullopt};
  for (Eigen::Index k = 0; k < tau; ++k)
    for (Eigen::Index j = 0; j < p; ++j) log.scalars(k, j) = base + 0.1 * static_cast<double>(k * p + j) - 1.0 / 3.0;
  return log;
}

Ledger small_ledger(Eigen::Index tau, Eigen::Index p) {
  return Ledger(LedgerHeader{8, static_cast<std::uint32_t>(tau), static_cast<std::uint32_t>(p), Seed{99}});
}

}  // namespace

TEST_CASE("record_round appends and tracks participants") {
  const std::vector<ClientId> ids{1, 4};
  Ledger ledger = record_round(small_ledger(1, 2), make_log(0, 1, 2), ids);
  CHECK(ledger.current_round() == 1);
  CHECK(ledger.participation().size() == 2);
  CHECK(ledger.last_participation(1) == 0);
  CHECK(ledger.last_participation(4) == 0);
  CHECK(ledger.last_participation(7) == 0);
}

TEST_CASE("record_round rejects gaps and bad shapes") {
  const std::vector<ClientId> ids{0};
  Ledger ledger = record_round(small_ledger(1, 2), make_log(0, 1, 2), ids);
  try {
    ledger.record(make_log(2, 1, 2), ids);
    FAIL("expected protocol-order error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kProtocolOrder);
  }
  try {
    ledger.record(make_log(1, 2, 2), ids);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShapeMismatch);
  }
  RoundLog bad = make_log(1, 1, 2);
  bad.scalars(0, 1) = NAN;
  CHECK_THROWS_AS(ledger.record(bad, ids), Error);
  CHECK(ledger.current_round() == 1);
}

TEST_CASE("last_participation matches an independent replay over 100 rounds") {
  Ledger ledger = small_ledger(1, 1);
  std::map<ClientId, Round> oracle;
  for (Round r = 0; r < 100; ++r) {
    std::vector<ClientId> ids{static_cast<ClientId>(r % 7), static_cast<ClientId>(7 + (r * 3) % 5)};
    ledger.record(make_log(r, 1, 1), ids);
    for (ClientId id : ids) oracle[id] = r;
  }
  CHECK(ledger.participation() == oracle);
}

TEST_CASE("fetch_since is the half-open range [since, current)") {
  Ledger ledger = small_ledger(1, 1);
  const std::vector<ClientId> ids{0};
  for (Round r = 0; r < 7; ++r) ledger.record(make_log(r, 1, 1), ids);
  CHECK(fetch_since(ledger, 7).empty());
  const auto logs = fetch_since(ledger, 3);
  REQUIRE(logs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(logs[i].round == 3 + i);
  try {
    (void)ledger.fetch_since(8);
    FAIL("expected range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRange);
  }
}

TEST_CASE("fetches cover each round exactly once per client") {
  const std::size_t M = 6;
  Ledger ledger = small_ledger(1, 1);
  std::vector<Round> last(M, 0);
  std::vector<std::vector<int>> covered(M, std::vector<int>(50, 0));
  CounterStream s(Seed{17});
  for (Round r = 0; r < 50; ++r) {
    std::vector<ClientId> ids;
    for (ClientId i = 0; i < M; ++i) {
      if (s.uniform_index(3) == 0) ids.push_back(i);
    }
    if (ids.empty()) ids.push_back(static_cast<ClientId>(r % M));
    for (ClientId id : ids) {
      for (const RoundLog& log : ledger.fetch_since(last[id])) ++covered[id][log.round];
      last[id] = r;
    }
    ledger.record(make_log(r, 1, 1), ids);
  }
  // Final catch-up so every client has seen the whole history.
  for (ClientId id = 0; id < M; ++id) {
    for (const RoundLog& log : ledger.fetch_since(last[id])) ++covered[id][log.round];
    for (int c : covered[id]) CHECK(c == 1);
  }
}

TEST_CASE("meter: 40 bytes per round at m=2, tau=1, P=5") {
  CommMeter meter(WireCost{4, 0});
  const std::vector<std::uint64_t> missed{1, 1};
  meter = meter_round(meter, 1, 5, missed);
  CHECK(meter.uplink_bytes() == 40);
  CHECK(meter.downlink_bytes() == 40);
  CHECK(meter.per_client_bytes() == doctest::Approx(40.0));
  for (int r = 1; r < 550; ++r) meter.add_round(1, 5, missed);
  CHECK(meter.per_client_bytes() == doctest::Approx(22000.0));
  CHECK(std::abs(meter.per_client_bytes() / 1024.0 - 21.56) / 21.56 <= 0.02);
}

TEST_CASE("meter: smallest case and seed costs") {
  CommMeter meter(WireCost{4, 0});
  const std::vector<std::uint64_t> one{1};
  meter.add_round(1, 1, one);
  CHECK(meter.total_bytes() == 8);

  CommMeter seeds(WireCost{4, 8});
  const std::vector<std::uint64_t> three{3};
  seeds.add_round(2, 3, three);
  CHECK(seeds.uplink_bytes() == 2 * 3 * 4);
  CHECK(seeds.downlink_bytes() == 3 * 2 * 3 * 4 + 4 * 2 * 3 * 8);

  CommMeter fresh(WireCost{4, 0});
  const std::vector<std::uint64_t> none{0, 0};
  fresh.add_round(1, 5, none);
  CHECK(fresh.downlink_bytes() == 0);
  CHECK(fresh.uplink_bytes() == 40);
}

TEST_CASE("serialize round-trips") {
  const Ledger empty = small_ledger(3, 2);
  CHECK(deserialize(serialize(empty)) == empty);

  Ledger ledger = small_ledger(3, 2);
  for (Round r = 0; r < 10; ++r) {
    std::vector<ClientId> ids{static_cast<ClientId>(r % 4), static_cast<ClientId>(4 + r % 3)};
    RoundLog log = make_log(r, 3, 2, std::ldexp(1.0, -static_cast<int>(r)));
    if (r == 4) log.seeds = std::vector<Seed>{Seed{1}, Seed{2}, Seed{3}, Seed{4}, Seed{5}, Seed{6}};
    ledger.record(std::move(log), ids);
  }
  const std::vector<std::byte> bytes = serialize(ledger);
  const Ledger back = deserialize(bytes);
  CHECK(back == ledger);
  CHECK(serialize(back) == bytes);
  CHECK(back.logs()[4].seed(SeedSchedule(Seed{99}), 1, 0) == Seed{3});
}

TEST_CASE("deserialize rejects malformed streams with an offset") {
  Ledger ledger = small_ledger(1, 2);
  const std::vector<ClientId> ids{0};
  ledger.record(make_log(0, 1, 2), ids);
  const std::vector<std::byte> bytes = serialize(ledger);

  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{30}, bytes.size() - 1}) {
    std::span<const std::byte> part(bytes.data(), cut);
    CHECK_THROWS_AS(deserialize(part), ParseError);
  }

  std::vector<std::byte> bad_magic = bytes;
  bad_magic[0] = std::byte{'X'};
  try {
    (void)deserialize(bad_magic);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }

  std::vector<std::byte> trailing = bytes;
  trailing.push_back(std::byte{0});
  CHECK_THROWS_AS(deserialize(trailing), ParseError);
}
