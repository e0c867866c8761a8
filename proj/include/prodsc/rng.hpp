#pragma once

#include <cmath>
#include <cstdint>

#include "prodsc/matrix.hpp"

namespace prodsc {

// Counter-based generator: each draw hashes (key, counter), so identical
// seeds give identical streams on every platform and sub-streams can be
// split off without sharing state.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : key_(mix(seed ^ 0x9E3779B97F4A7C15ULL)) {}

  // Independent sub-stream identified by `id`.
  RngState split(std::uint64_t id) const {
    RngState r(0);
    r.key_ = mix(key_ ^ mix(id + 0x632BE59BD9B4E019ULL));
    r.counter_ = 0;
    return r;
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without caching; two uniforms per draw keeps the stream a
  // pure function of the counter.
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

  Matrix gaussian_matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = gaussian();
    return m;
  }

  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = uniform(lo, hi);
    return m;
  }

  template <class It>
  void shuffle(It first, It last) {
    const std::size_t n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = next_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace prodsc
