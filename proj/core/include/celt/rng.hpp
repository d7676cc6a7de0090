#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace celt {

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator with platform-independent sampling helpers. The
/// standard distributions are implementation-defined, so every draw used
/// by the library goes through the members below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Normal(0, stddev) truncated to two standard deviations.
  double truncated_normal(double stddev);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Master seed expanded into named, independent substreams. Each stream
/// depends only on (master seed, name, index), never on draw order
/// elsewhere, so disabling one stage leaves the others' randomness intact.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t master) : master_(master) {}

  std::uint64_t seed_for(std::string_view name, std::uint64_t index = 0) const;
  Rng stream(std::string_view name, std::uint64_t index = 0) const {
    return Rng(seed_for(name, index));
  }
  std::uint64_t master() const { return master_; }

 private:
  std::uint64_t master_;
};

}  // namespace celt
