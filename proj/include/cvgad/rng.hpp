#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace cvgad {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// xoshiro256** with fully specified, platform-independent sampling helpers.
/// std::uniform_*_distribution is implementation-defined, so every draw that
/// feeds a reproducibility contract goes through this class instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = detail::splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) via rejection; bound must be positive.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  int next_index(int bound) { return static_cast<int>(next_below(static_cast<std::uint64_t>(bound))); }

  bool next_bernoulli(double p) { return next_double() < p; }

  /// Standard normal via Box-Muller (both values used, cached).
  double next_gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct values from [0, n), in selection order.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + next_index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/// Hash-combines a seed with stream tags so that independent consumers
/// (epochs, nodes, rounds, iterations) get decorrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t state = base;
  std::uint64_t h = detail::splitmix64(state);
  state ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= detail::splitmix64(state);
  state ^= b + 0xc2b2ae3d27d4eb4fULL;
  h ^= detail::splitmix64(state);
  state ^= c + 0x165667b19e3779f9ULL;
  h ^= detail::splitmix64(state);
  return h;
}

/// Stream tags for the pipeline's independent RNG consumers.
namespace rng_tag {
constexpr std::uint64_t kInjection = 0x01;
constexpr std::uint64_t kParamInit = 0x02;
constexpr std::uint64_t kEpochShuffle = 0x03;
constexpr std::uint64_t kWalk = 0x04;
constexpr std::uint64_t kPurifyPass = 0x05;
constexpr std::uint64_t kScoreRound = 0x06;
constexpr std::uint64_t kSimTieBreak = 0x07;
constexpr std::uint64_t kSynthetic = 0x08;
}  // namespace rng_tag

}  // namespace cvgad
