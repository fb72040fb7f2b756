#ifndef HISO_RNG_HPP
#define HISO_RNG_HPP

#include <compare>
#include <cstddef>
#include <cstdint>

#include "hiso/types.hpp"

namespace hiso {

/// A 64-bit seed. The seed alone reconstructs a perturbation vector, which is
/// what lets the protocol ship seeds instead of vectors.
struct Seed {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(Seed, Seed) = default;
};

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Word `counter` of the stream keyed by `seed`. Stateless: any word of any
/// stream can be produced in O(1) without generating its predecessors.
constexpr std::uint64_t stream_word(Seed seed, std::uint64_t counter) noexcept {
  return mix64(mix64(seed.value ^ 0x6a09e667f3bcc909ULL) ^ (counter * kGolden));
}

/// Seed of an independent auxiliary stream (client sampling, batches, task
/// data). Distinct tags never share words with the perturbation schedule.
Seed substream(Seed root, std::uint64_t tag, std::uint64_t a = 0, std::uint64_t b = 0);

/// Sequential reader over a counter-based stream.
class CounterStream {
 public:
  explicit CounterStream(Seed seed) : seed_(seed) {}

  std::uint64_t next_u64() noexcept { return stream_word(seed_, counter_++); }

  /// Uniform in [0, 1) with 53 bits.
  double next_uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection keeps it exactly uniform.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via the same transform as gaussian_vector.
  double next_gaussian();

 private:
  Seed seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Length-dim vector of standard normal variates, a pure function of
/// (seed, dim). Box-Muller over pairs of stream words: entry 2q is
/// r*cos(theta) and entry 2q+1 is r*sin(theta), with
/// u1 = (w[2q] >> 11 + 1) * 2^-53 in (0, 1] and u2 = (w[2q+1] >> 11) * 2^-53.
/// Shorter vectors are prefixes of longer ones for the same seed.
ModelVector gaussian_vector(Seed seed, Eigen::Index dim);

/// Deterministic perturbation seeds for every (round, local step,
/// perturbation) cell of a run, derived from a shared root.
///
/// The cell is packed as (r << 32) | (k << 16) | p and pushed through an odd
/// multiplier and mix64, both bijections, so seeds are distinct on any grid
/// with r < 2^32 and k, p < 2^16.
class SeedSchedule {
 public:
  SeedSchedule() = default;
  explicit SeedSchedule(Seed root) : root_(root) {}

  Seed root() const noexcept { return root_; }
  Seed derive(Round r, std::size_t k, std::size_t p) const;

  /// Throws ConfigError if the grid is out of packing range or any two cells
  /// collide. Enumerates the grid, so cost is O(rounds * steps * perturbations).
  void check_grid(std::uint64_t rounds, std::size_t steps, std::size_t perturbations) const;

  friend bool operator==(const SeedSchedule&, const SeedSchedule&) = default;

 private:
  Seed root_{};
};

inline Seed derive_seed(const SeedSchedule& schedule, Round r, std::size_t k, std::size_t p) {
  return schedule.derive(r, k, p);
}

}  // namespace hiso

#endif  // HISO_RNG_HPP
