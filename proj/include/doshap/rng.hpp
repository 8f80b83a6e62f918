#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace doshap {

// Derives an independent stream seed from a root seed and a list of tags
// (operation codes, replication counters, coalition hashes...).  The mixing
// is splitmix64-style so that nearby tag values give unrelated streams.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags);

// A seeded random stream.  Integer draws and shuffles are implemented by
// hand so that sequences depend only on the seed, not on the standard
// library version; real-valued distributions use the usual generic
// transforms on top of the raw 64-bit stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n), n >= 1 (rejection method).
  std::uint64_t uniform_below(std::uint64_t n);

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive bounds

  // Fisher-Yates shuffle driven by uniform_below.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  double normal(double mean, double stddev);
  double exponential(double rate);
  double chi_squared(double dof);
  double gamma(double shape);  // unit scale
  double beta(double a, double b);

 private:
  std::mt19937_64 gen_;
};

}  // namespace doshap
