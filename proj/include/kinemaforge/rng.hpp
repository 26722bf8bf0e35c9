#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace kf {

// Deterministic random source.  std::mt19937_64 has a bit-exact portable
// output sequence, but the std distributions do not, so we map raw draws to
// doubles ourselves (uniform via the top 53 bits, normal via Box-Muller).
// Every run with the same seed therefore produces identical streams on any
// conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).  Rejection-free modulo is fine here: n is always tiny
  // compared to 2^64, the bias is far below anything observable.
  std::uint64_t uniform_index(std::uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller; draws two uniforms per pair and caches
  // the second value.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Guard the log: uniform() can return exactly 0.
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::Vector3d gaussian3() {
    double a = gaussian();
    double b = gaussian();
    double c = gaussian();
    return {a, b, c};
  }

  Eigen::Vector3d uniform3(double lo, double hi) {
    double a = uniform(lo, hi);
    double b = uniform(lo, hi);
    double c = uniform(lo, hi);
    return {a, b, c};
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; used to mix seeds with purpose tags so that distinct
// subsystems never share a stream even when the user seed is small.
inline std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent seed for a named purpose (and optional index), e.g.
// derive_seed(seed, "kmeans", 0).  FNV-1a over the tag keeps it portable.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ULL;
  }
  return mix_u64(seed ^ mix_u64(h + 0x1000 * index));
}

}  // namespace kf
