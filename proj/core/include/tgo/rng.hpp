#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tgo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. All draws go through hand-rolled transforms on the
/// raw mt19937_64 output so that sequences are identical across standard
/// libraries (std distributions make no such guarantee).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Stream for replicate `index` of a run seeded with `seed`. Mixing keeps
  /// concurrent replicates decorrelated and order-independent.
  static RngStream derive(std::uint64_t seed, std::uint64_t index) {
    return RngStream(splitmix64(seed ^ splitmix64(index + 0x51ed2701)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Index draw from unnormalized nonnegative weights (inverse CDF walk).
  std::size_t categorical(const double* weights, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += weights[i];
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  std::size_t categorical(const std::vector<double>& weights) {
    return categorical(weights.data(), weights.size());
  }

  /// Integer in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tgo
