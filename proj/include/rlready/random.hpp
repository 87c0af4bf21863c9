// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace rlready {

// Seeded generator whose output sequence is fixed across platforms and
// standard libraries. std::uniform_int_distribution is implementation
// defined, so bounded draws are done here by rejection on mt19937_64.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, stream) so parallel consumers draw the
  // same values regardless of scheduling.
  static Rng stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL)));
  }

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) {
      return 0;
    }
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Moves a uniform random k-subset of v into v[0..k) (partial Fisher-Yates).
  template <typename T> void partial_shuffle(std::vector<T> &v, std::size_t k) {
    for (std::size_t i = 0; i < k && i + 1 < v.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(v.size() - i));
      using std::swap;
      swap(v[i], v[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::mt19937_64 engine_;
};

} // namespace rlready
