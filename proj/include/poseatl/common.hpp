#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace poseatl {

// splitmix64 finalizer. Used as the mixing primitive for all seeded
// randomness so that results are identical across platforms and runs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based deterministic RNG. State is derived purely from the key
// sequence, never from global state, so any draw can be reproduced from
// its keys alone.
class Rng {
 public:
  explicit Rng(std::initializer_list<std::uint64_t> keys) : state_(0x243F6A8885A308D3ULL) {
    for (std::uint64_t k : keys) state_ = mix64(state_ ^ k);
  }
  explicit Rng(std::uint64_t seed) : Rng({seed}) {}

  std::uint64_t next_u64() {
    counter_++;
    return mix64(state_ ^ counter_);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // modulo bias is negligible for the small n used here, but reject anyway
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // standard normal via Box-Muller
  double gaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

// Key pieces for counter-based draws; string literals hashed with FNV-1a so
// call sites can name the stream they draw from.
inline constexpr std::uint64_t stream_key(const char* name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char* p = name; *p; ++p) h = (h ^ static_cast<std::uint64_t>(*p)) * 0x100000001B3ULL;
  return h;
}

inline std::string format_double(double v, int precision = 10) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

}  // namespace poseatl
