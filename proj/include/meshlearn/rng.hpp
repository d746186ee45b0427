#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace meshlearn {

// Named sub-stream tags so every consumer of randomness derives its seed from
// the run seed through an explicit, stable path. Shuffle streams are keyed by
// epoch only (not agent id): an agent's batch order must not depend on which
// other agents exist in the run.
namespace stream {
inline constexpr std::uint64_t kData = 0x01;
inline constexpr std::uint64_t kPartition = 0x02;
inline constexpr std::uint64_t kInit = 0x03;
inline constexpr std::uint64_t kShuffleLocal = 0x04;
inline constexpr std::uint64_t kShuffleTransfer = 0x05;
inline constexpr std::uint64_t kGossip = 0x06;
}  // namespace stream

using stream::kData;
using stream::kGossip;
using stream::kInit;
using stream::kPartition;
using stream::kShuffleLocal;
using stream::kShuffleTransfer;

// splitmix64 finalizer.
inline std::uint64_t hash_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t x = hash_mix(base ^ hash_mix(a));
  x = hash_mix(x ^ hash_mix(b));
  return hash_mix(x ^ hash_mix(c));
}

// Deterministic random stream. The engine is std::mt19937_64 (bit-stable by
// the standard); value mappings are implemented here instead of through
// std::*_distribution, whose outputs are implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Unbiased integer in [0, n), n >= 1, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace meshlearn
