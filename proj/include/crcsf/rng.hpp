#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace crcsf {

/// Mixes a master seed with a stream id into an independent stream seed.
/// splitmix64 finalizer; avoids correlated mt19937_64 states for nearby ids.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic RNG stream. mt19937_64 output is pinned by the standard;
/// the distribution transforms are implemented here because the std
/// distribution objects are not bit-portable across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // rejection-free modulo is fine here: n is always tiny relative to 2^64
    return gen_() % n;
  }

  /// Standard normal via Marsaglia polar method.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double r = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * r;
    have_spare_ = true;
    return u * r;
  }

  /// N(0, sigma^2) clipped to [-clip, clip].
  double clipped_normal(double sigma, double clip) {
    return std::clamp(sigma * normal(), -clip, clip);
  }

  /// Derives an independent child stream from this one.
  Rng spawn() { return Rng(derive_seed(gen_(), 0)); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace crcsf
