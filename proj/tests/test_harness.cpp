#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hiso/accounting.hpp"
#include "hiso/commands.hpp"
#include "hiso/experiments.hpp"
#include "hiso/metrics_io.hpp"
#include "hiso/run_spec.hpp"
#include "hiso/verify.hpp"

using namespace hiso;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hiso_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

json minimal() {
  return json::parse(R"({"task": {"kind": "quadratic", "dim": 10}, "M": 4, "m": 2, "R": 5, "eta": 0.01})");
}

std::string config_field(const json& doc) {
  try {
    (void)parse_run_spec(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("run spec parsing and validation") {
  const RunSpec spec = parse_run_spec(minimal());
  CHECK(spec.round.clients == 4);
  CHECK(spec.round.rounds == 5);
  CHECK(std::get<QuadraticSpec>(spec.task).clients == 4);
  CHECK(parse_run_spec(to_json(spec)).round.eta == spec.round.eta);

  json bad = minimal();
  bad["m"] = 5;
  CHECK(config_field(bad) == "m");
  bad = minimal();
  bad["hessian"] = {{"nu", 2.0}};
  CHECK(config_field(bad) == "hessian.nu");
  bad = minimal();
  bad["task"]["dimension"] = 3;
  CHECK(config_field(bad) == "task.dimension");
  bad = minimal();
  bad["method"] = "fedavg";
  CHECK(config_field(bad) == "method");
  bad = minimal();
  bad["cost"] = {{"bytes_per_scalar", 0}};
  CHECK(config_field(bad) == "cost.bytes_per_scalar");
  bad = minimal();
  bad["tau"] = -1;
  CHECK(config_field(bad) == "tau");
  bad = minimal();
  bad.erase("task");
  CHECK(config_field(bad) == "task");
}

TEST_CASE("cmd_run writes one JSONL record per round plus summary and ledger") {
  RunSpec spec = parse_run_spec(minimal());
  const fs::path dir = scratch("run");
  spec.output_dir = dir.string();
  spec.dump_hessian = true;
  std::ostringstream log;
  CHECK(cmd_run(spec, log) == kExitOk);
  const auto lines = read_lines(dir / "metrics.jsonl");
  REQUIRE(lines.size() == 5);
  for (std::size_t r = 0; r < 5; ++r) {
    const json rec = json::parse(lines[r]);
    CHECK(rec["round"] == r);
    for (const char* key : {"loss", "uplink_bytes", "downlink_bytes", "cumulative_bytes", "hessian", "wall_ms"}) {
      CHECK(rec.contains(key));
    }
  }
  const auto summary = read_lines(dir / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[0] == kSummaryHeader);
  CHECK(fs::file_size(dir / "hessian.f64") == 10 * sizeof(double));

  std::ifstream in(dir / "ledger.bin", std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  CHECK(deserialize(bytes).current_round() == 5);
}

TEST_CASE("DeComFL flag and nu = 0 give identical JSONL loss columns") {
  json a = minimal();
  a["R"] = 20;
  a["method"] = "decomfl";
  json b = minimal();
  b["R"] = 20;
  b["hessian"] = {{"nu", 0.0}};
  std::vector<std::string> losses[2];
  int i = 0;
  for (const json& doc : {a, b}) {
    RunSpec spec = parse_run_spec(doc);
    spec.output_dir = scratch("reduction" + std::to_string(i)).string();
    std::ostringstream log;
    REQUIRE(cmd_run(spec, log) == kExitOk);
    for (const std::string& line : read_lines(fs::path(spec.output_dir) / "metrics.jsonl")) {
      losses[i].push_back(json::parse(line)["loss"].dump());
    }
    ++i;
  }
  CHECK(losses[0] == losses[1]);
}

TEST_CASE("guarded maps errors to exit codes") {
  std::ostringstream err;
  CHECK(guarded([]() -> int { throw ConfigError("m", "bad"); }, err) == kExitConfig);
  CHECK(err.str().find("m: bad") != std::string::npos);
  CHECK(guarded([]() -> int { throw EstimatorFailure(Evaluation::kPerturbed, NAN, 1, 0, 0); }, err) ==
        kExitEstimator);
  CHECK(guarded([] { return kExitOk; }, err) == kExitOk);
}

TEST_CASE("account table") {
  AccountSetup setup;
  setup.dim = 1300000000;
  const auto rows = account_table(setup, {1, 550, 275});
  CHECK(rows[0].scalar_bytes == 40.0);
  CHECK(rows[0].full_vector_bytes == 5.2e9);
  CHECK(rows[0].ratio == doctest::Approx(1.3e8));
  CHECK(std::abs(rows[1].scalar_bytes / 1024.0 - 21.56) / 21.56 <= 0.02);
  CHECK(std::abs(rows[2].scalar_bytes / 1024.0 - 10.78) / 10.78 <= 0.02);
  CHECK(format_bytes(22000) == "22000 B = 22.00 KB = 21.48 KiB");
  setup.dim = 0;
  try {
    (void)account_table(setup, {1});
    FAIL("expected config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "dim");
  }
}

TEST_CASE("sweep: empty grid, budget, rows") {
  json doc = minimal();
  doc["sweep"] = {{"nu", json::array()}};
  RunSpec spec = parse_run_spec(doc);
  spec.output_dir = scratch("sweep_empty").string();
  std::ostringstream log;
  CHECK(cmd_sweep(spec, log) == kExitOk);
  const auto lines = read_lines(fs::path(spec.output_dir) / "sweep.csv");
  REQUIRE(lines.size() == 1);
  CHECK(lines[0] == kSweepHeader);

  doc["sweep"] = {{"nu", {0.01, 0.05}}, {"tau", {1, 2}}, {"budget", 3}};
  CHECK_THROWS_AS(run_sweep(parse_run_spec(doc), *parse_run_spec(doc).sweep), ConfigError);

  doc["sweep"] = {{"nu", {0.01, 0.05}}, {"tau", {1, 2}}};
  const RunSpec grid = parse_run_spec(doc);
  const auto rows = run_sweep(grid, *grid.sweep);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].nu == 0.05);
  CHECK(rows[3].tau == 2);
  CHECK(sweep_csv_row(rows[0]).rfind("hiso,0.01,1,1,0.01,", 0) == 0);
}

TEST_CASE("rounds_to_threshold and relative_range") {
  Trace t;
  for (double l : {5.0, 3.0, 1.0, 0.5}) {
    RoundRecord rec;
    rec.loss = l;
    t.rounds.push_back(rec);
  }
  CHECK(rounds_to_threshold(t, 1.0) == 3u);
  CHECK_FALSE(rounds_to_threshold(t, 0.1).has_value());
  CHECK(relative_range({2.0, 3.0, 2.5}) == doctest::Approx(0.5));
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("fourth-moment targets by hand") {
  const Matrix<double> five = fourth_moment_target(ModelVector::Ones(3), Matrix<double>::Identity(3, 3));
  CHECK(five.isApprox(5.0 * Matrix<double>::Identity(3, 3)));
  ModelVector lambda(2);
  lambda << 1, 4;
  Matrix<double> w = Matrix<double>::Zero(2, 2);
  w(0, 0) = 2;
  const Matrix<double> t = fourth_moment_target(lambda, w);
  CHECK(t(0, 0) == 6.0);
  CHECK(t(1, 1) == 8.0);
  CHECK(t(0, 1) == 0.0);

  const Matrix<double> mc = fourth_moment_monte_carlo(ModelVector::Ones(3), Matrix<double>::Identity(3, 3),
                                                      200000, Seed{4});
  CHECK(entrywise_relative_error(mc, five) <= 0.03);
}

TEST_CASE("verification reports are deterministic and machine-readable") {
  const VerificationReport a = verify_lemmas(2, 20000, Seed{5});
  const VerificationReport b = verify_lemmas(2, 20000, Seed{5});
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) CHECK(a.checks[i].measured == b.checks[i].measured);
  const json j = a.to_json();
  CHECK(j["checks"].size() == a.checks.size());
  CHECK(j["all_passed"] == a.all_passed());
  CHECK_THROWS_AS(verify_lemmas(7, 100, Seed{1}), ConfigError);
}

TEST_CASE("fuzzed configurations stay within their declared ranges") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const FuzzCase fc = fuzz_case(Seed{s});
    const RoundConfig& c = fc.spec.round;
    const auto d = std::visit([](const auto& t) { return static_cast<long>(t.dim); }, fc.spec.task);
    CHECK((d >= 4 && d <= 128));
    CHECK((c.clients >= 2 && c.clients <= 16));
    CHECK((c.sampled >= 1 && c.sampled <= c.clients));
    CHECK((c.steps >= 1 && c.steps <= 4));
    CHECK((c.perturbations >= 1 && c.perturbations <= 8));
    CHECK((c.rounds >= 3 && c.rounds <= 30));
  }
}

TEST_CASE("golden equivalence cases") {
  const FuzzCase eight = fuzz_case(Seed{8});
  CHECK(eight.spec.round.sampled < eight.spec.round.clients);
  const FuzzCase nine = fuzz_case(Seed{9});
  CHECK(nine.spec.round.steps == 4);
  for (std::uint64_t s : {7, 8, 9}) {
    const CheckResult r = equivalence_check(fuzz_case(Seed{s}).spec, "golden");
    CHECK(r.passed);
    CHECK(r.measured == 0.0);
  }
}
