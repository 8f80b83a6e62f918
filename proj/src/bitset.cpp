#include "doshap/bitset.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <stdexcept>

namespace doshap {

void Bitset::clear() { std::fill(w_.begin(), w_.end(), 0); }

bool Bitset::any() const {
  for (std::uint64_t w : w_)
    if (w) return true;
  return false;
}

std::size_t Bitset::count() const {
  std::size_t n = 0;
  for (std::uint64_t w : w_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

int Bitset::highest() const {
  for (std::size_t k = w_.size(); k-- > 0;) {
    if (w_[k]) return static_cast<int>(k * 64 + (63 - std::countl_zero(w_[k])));
  }
  return -1;
}

int Bitset::lowest() const {
  for (std::size_t k = 0; k < w_.size(); ++k) {
    if (w_[k]) return static_cast<int>(k * 64 + std::countr_zero(w_[k]));
  }
  return -1;
}

int Bitset::lowest_bit_of_word(std::uint64_t w) { return std::countr_zero(w); }

Bitset& Bitset::operator&=(const Bitset& o) {
  assert(nbits_ == o.nbits_);
  for (std::size_t k = 0; k < w_.size(); ++k) w_[k] &= o.w_[k];
  return *this;
}

Bitset& Bitset::operator|=(const Bitset& o) {
  assert(nbits_ == o.nbits_);
  for (std::size_t k = 0; k < w_.size(); ++k) w_[k] |= o.w_[k];
  return *this;
}

Bitset& Bitset::and_not(const Bitset& o) {
  assert(nbits_ == o.nbits_);
  for (std::size_t k = 0; k < w_.size(); ++k) w_[k] &= ~o.w_[k];
  return *this;
}

bool Bitset::intersects(const Bitset& o) const {
  assert(nbits_ == o.nbits_);
  for (std::size_t k = 0; k < w_.size(); ++k)
    if (w_[k] & o.w_[k]) return true;
  return false;
}

bool Bitset::is_subset_of(const Bitset& o) const {
  assert(nbits_ == o.nbits_);
  for (std::size_t k = 0; k < w_.size(); ++k)
    if (w_[k] & ~o.w_[k]) return false;
  return true;
}

std::vector<std::size_t> Bitset::to_indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for_each([&](std::size_t i) { out.push_back(i); });
  return out;
}

std::string Bitset::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(w_.size() * 16);
  for (std::size_t k = w_.size(); k-- > 0;) {
    for (int shift = 60; shift >= 0; shift -= 4) s.push_back(digits[(w_[k] >> shift) & 0xF]);
  }
  return s;
}

Bitset Bitset::from_hex(std::size_t nbits, const std::string& hex) {
  Bitset b(nbits);
  const std::size_t expected = b.w_.size() * 16;
  if (hex.size() != expected) throw std::invalid_argument("Bitset::from_hex: bad digit count");
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const char c = hex[i];
    std::uint64_t v;
    if (c >= '0' && c <= '9')
      v = static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      v = static_cast<std::uint64_t>(c - 'a' + 10);
    else
      throw std::invalid_argument("Bitset::from_hex: bad digit");
    const std::size_t word = b.w_.size() - 1 - i / 16;
    b.w_[word] = (b.w_[word] << 4) | v;
  }
  return b;
}

std::uint64_t Bitset::hash() const {
  // FNV-1a over the words plus the width.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (i * 8)) & 0xFF;
      h *= 1099511628211ull;
    }
  };
  mix(nbits_);
  for (std::uint64_t w : w_) mix(w);
  return h;
}

}  // namespace doshap
