#pragma once

// Seedable, portable random number generation. Every randomized operation in
// the library draws from an Rng whose seed is derived with stream_seed(), so
// results depend only on (inputs, seed) and golden values survive rebuilds
// and platform changes. No std::<distribution> is used anywhere: those are
// implementation-defined and would break recorded outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

#include "metanode/common.hpp"

namespace mn {

namespace detail {

// splitmix64 finalizer
inline u64 scramble(u64 z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline u64 combine(u64 h, u64 v) {
  return scramble(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

inline u64 fnv1a(std::string_view s) {
  u64 h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

// Derives the seed of a named sub-stream. Streams are keyed by a short tag
// (operation name) plus up to two integer coordinates, typically
// (epoch, type index). Changing any component yields an unrelated stream.
inline u64 stream_seed(u64 seed, std::string_view tag, u64 a = 0, u64 b = 0) {
  u64 h = detail::combine(seed, detail::fnv1a(tag));
  h = detail::combine(h, a);
  h = detail::combine(h, b);
  return h;
}

// splitmix64 engine with unbiased bounded draws (Lemire) and Box-Muller
// gaussians. The second gaussian of each pair is cached, so draw order is
// part of the stream contract.
class Rng {
 public:
  explicit Rng(u64 seed) : state_(seed) {}

  u64 next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::scramble(state_);
  }

  // uniform in [0, bound)
  u64 below(u64 bound) {
    if (bound == 0) throw ConfigError("Rng::below: bound must be positive");
    u64 x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    u64 l = static_cast<u64>(m);
    if (l < bound) {
      u64 t = (0 - bound) % bound;
      while (l < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * bound;
        l = static_cast<u64>(m);
      }
    }
    return static_cast<u64>(m >> 64);
  }

  // uniform double in [0, 1)
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates, descending
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (u64 i = v.size(); i > 1; --i) {
      u64 j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), returned sorted ascending
  std::vector<i64> sample_without_replacement(i64 n, i64 k) {
    if (k < 0 || k > n) throw ConfigError("sample_without_replacement: k out of range");
    std::vector<i64> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), i64{0});
    for (i64 i = 0; i < k; ++i) {
      u64 j = static_cast<u64>(i) + below(static_cast<u64>(n - i));
      std::swap(pool[static_cast<size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  // uniform permutation of [0, n)
  std::vector<i64> permutation(i64 n) {
    std::vector<i64> p(static_cast<size_t>(n));
    std::iota(p.begin(), p.end(), i64{0});
    shuffle(p);
    return p;
  }

 private:
  u64 state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mn
