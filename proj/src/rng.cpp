#include "hiso/rng.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "hiso/error.hpp"

namespace hiso {

namespace {

constexpr std::uint64_t kScheduleKey = 0xbb67ae8584caa73bULL;
constexpr std::uint64_t kSubstreamKey = 0x3c6ef372fe94f82bULL;

// One Box-Muller pair from two stream words.
inline void box_muller(std::uint64_t w0, std::uint64_t w1, double& c, double& s) {
  const double u1 = static_cast<double>((w0 >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;        // [0, 1)
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  c = radius * std::cos(theta);
  s = radius * std::sin(theta);
}

}  // namespace

Seed substream(Seed root, std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(root.value ^ kSubstreamKey);
  h = mix64(h ^ (tag * kGolden));
  h = mix64(h ^ (a * kGolden + 1));
  h = mix64(h ^ (b * kGolden + 2));
  return {h};
}

std::uint64_t CounterStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "uniform_index: empty range");
  // Lemire's multiply-shift with rejection of the biased low band.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
    if (static_cast<std::uint64_t>(product) >= threshold) {
      return static_cast<std::uint64_t>(product >> 64);
    }
  }
}

double CounterStream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double c = 0.0;
  const std::uint64_t w0 = next_u64();
  const std::uint64_t w1 = next_u64();
  box_muller(w0, w1, c, spare_);
  has_spare_ = true;
  return c;
}

ModelVector gaussian_vector(Seed seed, Eigen::Index dim) {
  if (dim < 1) throw Error(ErrorKind::kInvalidDimension, "gaussian_vector: dim must be >= 1");
  ModelVector out(dim);
  const Eigen::Index pairs = dim / 2;
  for (Eigen::Index q = 0; q < pairs; ++q) {
    const auto j = static_cast<std::uint64_t>(2 * q);
    box_muller(stream_word(seed, j), stream_word(seed, j + 1), out[2 * q], out[2 * q + 1]);
  }
  if (dim % 2 != 0) {
    const auto j = static_cast<std::uint64_t>(dim - 1);
    double unused = 0.0;
    box_muller(stream_word(seed, j), stream_word(seed, j + 1), out[dim - 1], unused);
  }
  return out;
}

Seed SeedSchedule::derive(Round r, std::size_t k, std::size_t p) const {
  const std::uint64_t packed = (static_cast<std::uint64_t>(r) << 32) |
                               (static_cast<std::uint64_t>(k & 0xffff) << 16) |
                               static_cast<std::uint64_t>(p & 0xffff);
  return {mix64(mix64(root_.value ^ kScheduleKey) + packed * kGolden)};
}

void SeedSchedule::check_grid(std::uint64_t rounds, std::size_t steps,
                              std::size_t perturbations) const {
  if (rounds > (std::uint64_t{1} << 32)) throw ConfigError("rounds", "exceeds 2^32 seed grid");
  if (steps > 0x10000) throw ConfigError("tau", "exceeds 2^16 seed grid");
  if (perturbations > 0x10000) throw ConfigError("P", "exceeds 2^16 seed grid");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(static_cast<std::size_t>(rounds * steps * perturbations));
  for (Round r = 0; r < rounds; ++r) {
    for (std::size_t k = 0; k < steps; ++k) {
      for (std::size_t p = 0; p < perturbations; ++p) {
        if (!seen.insert(derive(r, k, p).value).second) {
          throw ConfigError("perturbation_seed", "seed collision on the run grid");
        }
      }
    }
  }
}

}  // namespace hiso
