#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace s2s {

// Deterministic splitmix64 generator. All randomness in the project flows
// from one root seed through derive_seed(), so runs are bit-reproducible
// across platforms (no std::uniform_real_distribution, whose output is
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), n > 0
  std::int64_t uniform_int(std::int64_t n) {
    return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Seeded Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      std::int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  // Categorical draw over non-negative weights (need not be normalized).
  int categorical(const std::vector<double>& weights);

 private:
  std::uint64_t state_;
};

// Stable sub-seed for a named stream: FNV-1a over the name, mixed with the
// root seed. Identical on every platform.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

}  // namespace s2s
