#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace spcnn {

// splitmix64; used to derive substream seeds from (seed, index) pairs.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a + 0x632be59bd9b4e019ull * mix64(b)); }

// Deterministic RNG wrapper. std::mt19937_64 output is pinned by the
// standard; the distributions below are hand-rolled because the std
// distribution objects are implementation-defined and would break
// cross-compiler reproducibility of checkpoints and datasets.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1. Lemire multiply-shift; bias is
  // below 2^-64 and irrelevant here, determinism is what matters.
  uint64_t below(uint64_t n) {
    const uint64_t x = eng_();
    return static_cast<uint64_t>((static_cast<unsigned __int128>(x) * n) >> 64);
  }

  // Standard normal via Box-Muller on the uniform above.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spcnn
