// hiso: run, verify and account for scalar-only federated zeroth-order training.
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "hiso/commands.hpp"

int main(int argc, char** argv) {
  using namespace hiso;
  CLI::App app{"Scalar-only federated zeroth-order fine-tuning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Train from a JSON run spec; writes JSONL, CSV and the ledger");
  run->add_option("config", config_path, "Run spec (JSON)")->required();
  run->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");

  std::size_t dim = 3;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  auto* lemmas = app.add_subcommand("verify-lemmas", "Monte Carlo checks of the moment identities");
  lemmas->add_option("--dim", dim, "Dimension, at most 6")->capture_default_str();
  lemmas->add_option("--samples", samples, "Monte Carlo samples")->capture_default_str();
  lemmas->add_option("--seed", seed, "Root seed")->capture_default_str();
  lemmas->add_option("-o,--out", out_dir, "Directory for lemmas.json");

  std::size_t count = 20;
  auto* equiv = app.add_subcommand("verify-equivalence", "Scalar protocol vs full-vector oracle on fuzzed configs");
  equiv->add_option("--count", count, "Number of fuzzed configurations")->capture_default_str();
  equiv->add_option("--seed", seed, "First fuzz seed")->capture_default_str();
  equiv->add_option("-o,--out", out_dir, "Directory for equivalence.json");

  AccountSetup account;
  std::vector<std::uint64_t> rounds{550, 275};
  auto* acct = app.add_subcommand("account", "Communication table: scalar protocol vs full vectors");
  acct->add_option("--config", config_path, "Take m, tau, P, cost and dim from a run spec");
  acct->add_option("--dim", account.dim, "Model dimension for the full-vector column");
  acct->add_option("--rounds", rounds, "Round counts, one row each")->capture_default_str()->delimiter(',');
  acct->add_option("--m", account.sampled, "Clients per round")->capture_default_str();
  acct->add_option("--tau", account.steps, "Local steps")->capture_default_str();
  acct->add_option("--P", account.perturbations, "Perturbations per step")->capture_default_str();
  acct->add_option("--bytes-per-scalar", account.cost.bytes_per_scalar)->capture_default_str();
  acct->add_option("--bytes-per-seed", account.cost.bytes_per_seed)->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Cross-product runs over the spec's sweep lists");
  sweep->add_option("config", config_path, "Run spec with a sweep block (JSON)")->required();
  sweep->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const auto load = [&] {
    RunSpec spec = load_run_spec(config_path);
    if (!out_dir.empty()) spec.output_dir = out_dir;
    return spec;
  };

  return guarded(
      [&]() -> int {
        if (*run) return cmd_run(load(), std::cout);
        if (*sweep) return cmd_sweep(load(), std::cout);
        if (*lemmas) return cmd_verify_lemmas(dim, samples, Seed{seed}, out_dir, std::cout);
        if (*equiv) return cmd_verify_equivalence(count, Seed{seed}, out_dir, std::cout);
        if (!config_path.empty()) {
          const RunSpec spec = load();
          const RoundConfig& c = spec.round;
          if (acct->count("--dim") == 0) {
            std::visit([&](const auto& t) { account.dim = static_cast<std::uint64_t>(t.dim); }, spec.task);
          }
          if (acct->count("--m") == 0) account.sampled = c.sampled;
          if (acct->count("--tau") == 0) account.steps = c.steps;
          if (acct->count("--P") == 0) account.perturbations = c.perturbations;
          if (acct->count("--bytes-per-scalar") == 0) account.cost.bytes_per_scalar = c.cost.bytes_per_scalar;
          if (acct->count("--bytes-per-seed") == 0) account.cost.bytes_per_seed = c.cost.bytes_per_seed;
        }
        return cmd_account(account, rounds, std::cout);
      },
      std::cerr);
}
