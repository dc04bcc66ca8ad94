#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "kssl/core.hpp"

namespace kssl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Stream-splitting rule used everywhere an experiment derives per-cell /
/// per-trial seeds from a master seed: fold the tags into the master with
/// splitmix64 steps. Documented in the README so emitted numbers stay
/// traceable to their (cell, trial, purpose) triple.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h = splitmix64(s);
  }
  return h;
}

/// xoshiro256++ with splitmix64 seeding. All distributions are hand-rolled so
/// the byte streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Rng::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  /// Standard normal via Box-Muller (pair cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Mat normal_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  /// Uniform point on the unit sphere S^{d-1}.
  Vec sphere_vec(int d) {
    Vec v = normal_vec(d);
    double n = v.norm();
    while (n < 1e-12) {
      v = normal_vec(d);
      n = v.norm();
    }
    return v / n;
  }

  /// First m entries of a uniform random permutation of [0, n).
  std::vector<int> sample_without_replacement(int n, int m) {
    require(m <= n, "sample_without_replacement: m exceeds n");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < m; ++i) {
      const int j = i + below_int(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    return idx;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace kssl
