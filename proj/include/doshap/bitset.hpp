#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace doshap {

// Fixed-universe dynamic bitset.  Node sets and coalitions are represented
// as one of these over the node indices of a graph; the width is chosen at
// construction and is not limited to 64 bits (chunked into 64-bit words).
//
// Binary operations require operands of equal width.  Highest-bit lookup
// uses the hardware leading-zero count, never floating-point logarithms.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(std::size_t nbits) : nbits_(nbits), w_((nbits + 63) / 64, 0) {}

  static Bitset single(std::size_t nbits, std::size_t bit) {
    Bitset b(nbits);
    b.set(bit);
    return b;
  }

  std::size_t size() const { return nbits_; }

  bool test(std::size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { w_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { w_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  void clear();

  bool any() const;
  bool none() const { return !any(); }
  std::size_t count() const;  // population count

  // Index of the highest/lowest set bit, -1 when empty.
  int highest() const;
  int lowest() const;

  Bitset& operator&=(const Bitset& o);
  Bitset& operator|=(const Bitset& o);
  // Set difference, in place: *this = *this AND NOT o.
  Bitset& and_not(const Bitset& o);

  friend Bitset operator&(Bitset a, const Bitset& b) { return a &= b; }
  friend Bitset operator|(Bitset a, const Bitset& b) { return a |= b; }
  Bitset minus(const Bitset& o) const {
    Bitset r = *this;
    r.and_not(o);
    return r;
  }

  bool intersects(const Bitset& o) const;
  bool is_subset_of(const Bitset& o) const;

  bool operator==(const Bitset& o) const { return nbits_ == o.nbits_ && w_ == o.w_; }

  // Calls fn(index) for every set bit in ascending order.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t k = 0; k < w_.size(); ++k) {
      std::uint64_t w = w_[k];
      while (w) {
        const int b = lowest_bit_of_word(w);
        fn(k * 64 + static_cast<std::size_t>(b));
        w &= w - 1;
      }
    }
  }

  std::vector<std::size_t> to_indices() const;

  // Lowercase hex, highest word first, fixed width; used for cache snapshots.
  std::string to_hex() const;
  static Bitset from_hex(std::size_t nbits, const std::string& hex);

  std::uint64_t hash() const;

  // First word; convenient in tests for universes of <= 64 bits.
  std::uint64_t low_word() const { return w_.empty() ? 0 : w_[0]; }

 private:
  static int lowest_bit_of_word(std::uint64_t w);

  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> w_;
};

struct BitsetHash {
  std::size_t operator()(const Bitset& b) const { return static_cast<std::size_t>(b.hash()); }
};

}  // namespace doshap
