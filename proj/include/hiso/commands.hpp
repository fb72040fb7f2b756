#ifndef HISO_COMMANDS_HPP
#define HISO_COMMANDS_HPP

#include <cstdint>
#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include "hiso/accounting.hpp"
#include "hiso/error.hpp"
#include "hiso/run_spec.hpp"
#include "hiso/verify.hpp"

namespace hiso {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitEstimator = 3,
};

/// Writes metrics.jsonl, summary.csv, ledger.bin (and hessian.f64 when
/// requested) under spec.output_dir. With verify.equivalence set, also runs
/// the full-vector oracle and writes equivalence.json.
int cmd_run(const RunSpec& spec, std::ostream& log);

/// Writes <out>/<name>.json when out is non-empty; prints one line per check.
int report_and_exit(const VerificationReport& report, const std::string& out, const std::string& name,
                    std::ostream& log);

int cmd_verify_lemmas(std::size_t dim, std::uint64_t samples, Seed seed, const std::string& out,
                      std::ostream& log);
int cmd_verify_equivalence(std::size_t count, Seed seed, const std::string& out, std::ostream& log);

int cmd_account(const AccountSetup& setup, const std::vector<std::uint64_t>& rounds, std::ostream& log);

/// Writes sweep.csv under spec.output_dir. A spec without a sweep block runs
/// the base configuration once.
int cmd_sweep(const RunSpec& spec, std::ostream& log);

/// Maps exceptions to exit codes and prints the message to `err`.
template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EstimatorFailure& e) {
    err << "estimator failure: " << e.what() << '\n';
    return kExitEstimator;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace hiso

#endif  // HISO_COMMANDS_HPP
