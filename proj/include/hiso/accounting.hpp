#ifndef HISO_ACCOUNTING_HPP
#define HISO_ACCOUNTING_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hiso/ledger.hpp"

namespace hiso {

struct AccountSetup {
  std::uint64_t dim = 0;          // model size for the full-vector comparison
  std::size_t sampled = 2;        // m
  std::size_t steps = 1;          // tau
  std::size_t perturbations = 5;  // P
  WireCost cost{};
};

struct AccountRow {
  std::uint64_t rounds = 0;
  double scalar_bytes = 0.0;        // per participating client, both directions
  double full_vector_bytes = 0.0;   // per client, model upload of d scalars per round
  double ratio = 0.0;               // full_vector / scalar
};

/// Meters `rounds` steady-state rounds (every sampled client fetches exactly
/// one log per round) and compares with a protocol that ships d-vectors.
AccountRow account_rounds(const AccountSetup& setup, std::uint64_t rounds);

/// Throws ConfigError("dim") when dim is 0.
std::vector<AccountRow> account_table(const AccountSetup& setup, const std::vector<std::uint64_t>& rounds);

void print_account_table(std::ostream& out, const AccountSetup& setup,
                         const std::vector<AccountRow>& rows);

/// Both unit bases, e.g. "22000 B = 22.00 KB = 21.48 KiB".
std::string format_bytes(double bytes);

}  // namespace hiso

#endif  // HISO_ACCOUNTING_HPP
