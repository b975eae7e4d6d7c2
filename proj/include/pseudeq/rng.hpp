#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pseudeq {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-derived sub-seed so that each (seed, stream) pair gets an
// independent deterministic stream. Resumable loops key their randomness on
// (seed, iteration) instead of a rolling generator.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t s = base ^ (stream * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
  splitmix64(s);
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

// Uniform doubles are produced from raw engine bits, not std distributions,
// so streams are bit-reproducible for a fixed libstdc++ mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // (0, +inf); never returns exactly 0
  double exponential() { return -std::log1p(-uniform()); }

  std::size_t index(std::size_t n) {
    std::size_t k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  // Uniform point on the unit simplex (normalized exponentials).
  std::vector<double> simplex(int m) {
    std::vector<double> p(m);
    double s = 0.0;
    for (double& x : p) {
      x = exponential();
      s += x;
    }
    for (double& x : p) x /= s;
    return p;
  }

  // Normalized independent uniforms; sums to 1 but is not Dirichlet(1).
  std::vector<double> uniform_shares(int m) {
    std::vector<double> p(m);
    double s = 0.0;
    for (double& x : p) {
      x = uniform() + 1e-12;
      s += x;
    }
    for (double& x : p) x /= s;
    return p;
  }

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = index(i);
      std::swap(perm[i - 1], perm[j]);
    }
    return perm;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pseudeq
