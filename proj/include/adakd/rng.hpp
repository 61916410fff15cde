#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace adakd {

/// Deterministic RNG: mt19937_64 with explicit float/normal construction so
/// streams are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(splitmix(seed)) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller with cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586477 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n) by rejection.
  uint64_t below(uint64_t n) {
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Independent substream; distinct stream ids give unrelated sequences.
  Rng fork(uint64_t stream) const {
    uint64_t mixed = splitmix(seed_ ^ 0xa076bc5c9c09d821ULL);
    return Rng(mixed ^ splitmix(0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace adakd
