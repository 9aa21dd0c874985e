#pragma once

#include <cmath>
#include <cstdint>

namespace xorlab {

// Counter-based generator: every draw is splitmix64(key, counter++).
// Value semantics make sampling pure; split() derives an independent
// stream without touching the parent, so per-cell / per-dataset streams
// can be handed out deterministically.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // one splitmix64 round over a perturbed by hashed b
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (hash(b) | 1ULL);
    return hash(z);
  }

  // Independent stream keyed by (this stream, id). Parent state unchanged.
  Rng split(std::uint64_t id) const { return Rng(mix(key_, id)); }

  std::uint64_t next_u64() { return hash(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; caches the companion draw
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t hash(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace xorlab
