#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace csa {

/// Identifies one reproducible random stream. The generator state is a pure
/// function of (master_seed, stream_index), so ensembles can hand stream i
/// to trajectory i and get results independent of worker count.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
};

/// xoshiro256++ with SplitMix64 seeding. Self-contained so draws are
/// bit-identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(SeedSpec seed);

  std::uint64_t next_u64();

  /// Uniform on [0,1) with 53 significant bits.
  double uniform01();

  /// Standard normal via Box-Muller (one spare cached per generator).
  double normal();

  /// Index sampled from an unnormalized nonnegative weight vector.
  std::size_t discrete(std::span<const double> weights);

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Rng derive_stream(SeedSpec seed) { return Rng(seed); }

}  // namespace csa
