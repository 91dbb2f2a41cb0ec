#include "s2s/rng.hpp"

#include "s2s/errors.hpp"

namespace s2s {

int Rng::categorical(const std::vector<double>& weights) {
  require(!weights.empty(), "categorical: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0, "categorical: negative weight ", w);
    total += w;
  }
  require(total > 0.0, "categorical: all weights zero");
  double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // One splitmix round over the combination so nearby roots decorrelate.
  std::uint64_t z = root ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace s2s
