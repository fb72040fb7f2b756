#include "hiso/commands.hpp"

#include <filesystem>
#include <fstream>

#include "hiso/experiments.hpp"
#include "hiso/metrics_io.hpp"

namespace hiso {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw ConfigError("output_dir", "cannot write " + path.string());
  return out;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir", "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

}  // namespace

int cmd_run(const RunSpec& spec, std::ostream& log) {
  const fs::path dir = prepare_dir(spec.output_dir);
  const auto task = make_task(spec);
  TraceOptions options;
  options.keep_models = spec.verify_equivalence;
  const Trace trace = run_training(*task, spec.round, options);

  {
    std::ofstream out = open_output(dir / "metrics.jsonl");
    write_jsonl(out, trace);
  }
  {
    std::ofstream out = open_output(dir / "summary.csv");
    out << kSummaryHeader << '\n' << summary_row(trace, spec.round.method) << '\n';
  }
  {
    std::ofstream out = open_output(dir / "ledger.bin", std::ios::binary);
    const std::vector<std::byte> bytes = serialize(trace.ledger);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (spec.dump_hessian) {
    std::ofstream out = open_output(dir / "hessian.f64", std::ios::binary);
    write_diag(out, trace.final_hessian);
  }
  {
    std::ofstream out = open_output(dir / "spec.json");
    out << to_json(spec).dump(2) << '\n';
  }

  const double final_loss = trace.rounds.empty() ? trace.initial_loss : trace.rounds.back().loss;
  log << to_string(spec.round.method) << ": " << trace.rounds.size() << " rounds, loss "
      << format_double(trace.initial_loss) << " -> " << format_double(final_loss) << ", "
      << format_bytes(static_cast<double>(trace.meter.total_bytes())) << " metered\n";

  if (!spec.verify_equivalence) return kExitOk;
  VerificationReport report;
  report.checks.push_back(equivalence_check(spec, "equivalence.run"));
  return report_and_exit(report, spec.output_dir, "equivalence", log);
}

int report_and_exit(const VerificationReport& report, const std::string& out, const std::string& name,
                    std::ostream& log) {
  for (const CheckResult& c : report.checks) {
    log << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << format_double(c.measured)
        << " tolerance=" << format_double(c.tolerance) << " samples=" << c.samples << " seed=" << c.seed
        << " runtime_ms=" << format_double(c.runtime_ms);
    if (!c.detail.empty()) log << " (" << c.detail << ')';
    log << '\n';
  }
  if (!out.empty()) {
    std::ofstream f = open_output(prepare_dir(out) / (name + ".json"));
    f << report.to_json().dump(2) << '\n';
  }
  return report.all_passed() ? kExitOk : kExitCheckFailed;
}

int cmd_verify_lemmas(std::size_t dim, std::uint64_t samples, Seed seed, const std::string& out,
                      std::ostream& log) {
  return report_and_exit(verify_lemmas(dim, samples, seed), out, "lemmas", log);
}

int cmd_verify_equivalence(std::size_t count, Seed seed, const std::string& out, std::ostream& log) {
  return report_and_exit(verify_equivalence(count, seed), out, "equivalence", log);
}

int cmd_account(const AccountSetup& setup, const std::vector<std::uint64_t>& rounds, std::ostream& log) {
  print_account_table(log, setup, account_table(setup, rounds));
  return kExitOk;
}

int cmd_sweep(const RunSpec& spec, std::ostream& log) {
  const SweepGrid grid = spec.sweep.value_or(SweepGrid{});
  const std::vector<SweepRow> rows = run_sweep(spec, grid);
  const fs::path dir = prepare_dir(spec.output_dir);
  std::ofstream out = open_output(dir / "sweep.csv");
  out << kSweepHeader << '\n';
  for (const SweepRow& row : rows) out << sweep_csv_row(row) << '\n';
  log << rows.size() << " runs written to " << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

}  // namespace hiso
