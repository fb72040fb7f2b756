#include "hiso/accounting.hpp"

#include <cstdio>
#include <ostream>
#include <vector>

#include "hiso/error.hpp"

namespace hiso {

AccountRow account_rounds(const AccountSetup& setup, std::uint64_t rounds) {
  CommMeter meter(setup.cost);
  const std::vector<std::uint64_t> one_log_each(setup.sampled, 1);
  for (std::uint64_t r = 0; r < rounds; ++r) {
    meter.add_round(setup.steps, setup.perturbations, one_log_each);
  }
  AccountRow row;
  row.rounds = rounds;
  row.scalar_bytes = meter.per_client_bytes();
  row.full_vector_bytes = static_cast<double>(rounds) * static_cast<double>(setup.dim) *
                          static_cast<double>(setup.cost.bytes_per_scalar);
  row.ratio = row.scalar_bytes > 0.0 ? row.full_vector_bytes / row.scalar_bytes : 0.0;
  return row;
}

std::vector<AccountRow> account_table(const AccountSetup& setup, const std::vector<std::uint64_t>& rounds) {
  if (setup.dim == 0) throw ConfigError("dim", "must be >= 1");
  if (setup.sampled < 1) throw ConfigError("m", "must be >= 1");
  if (setup.steps < 1) throw ConfigError("tau", "must be >= 1");
  if (setup.perturbations < 1) throw ConfigError("P", "must be >= 1");
  if (setup.cost.bytes_per_scalar < 1) throw ConfigError("bytes_per_scalar", "must be >= 1");
  std::vector<AccountRow> rows;
  for (std::uint64_t r : rounds) rows.push_back(account_rounds(setup, r));
  return rows;
}

std::string format_bytes(double bytes) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.0f B = %.2f KB = %.2f KiB", bytes, bytes / 1000.0, bytes / 1024.0);
  return buf;
}

namespace {

std::string human(double bytes) {
  static const char* kUnits[] = {"B", "KB", "MB", "GB", "TB", "PB"};
  int u = 0;
  while (bytes >= 1000.0 && u < 5) {
    bytes /= 1000.0;
    ++u;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f %s", bytes, kUnits[u]);
  return buf;
}

}  // namespace

void print_account_table(std::ostream& out, const AccountSetup& setup, const std::vector<AccountRow>& rows) {
  out << "# d=" << setup.dim << " m=" << setup.sampled << " tau=" << setup.steps
      << " P=" << setup.perturbations << " bytes/scalar=" << setup.cost.bytes_per_scalar
      << " bytes/seed=" << setup.cost.bytes_per_seed << '\n';
  out << "rounds,scalar_bytes,scalar_kb,scalar_kib,full_vector_bytes,full_vector,ratio\n";
  for (const AccountRow& row : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%llu,%.0f,%.2f,%.2f,%.0f,%s,%.4g\n",
                  static_cast<unsigned long long>(row.rounds), row.scalar_bytes,
                  row.scalar_bytes / 1000.0, row.scalar_bytes / 1024.0, row.full_vector_bytes,
                  human(row.full_vector_bytes).c_str(), row.ratio);
    out << buf;
  }
}

}  // namespace hiso
