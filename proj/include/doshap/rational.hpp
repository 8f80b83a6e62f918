#pragma once

#include <cstdint>
#include <string>

namespace doshap {

// Exact rational arithmetic for discrete-model enumeration.  Keeping the
// enumeration exact means that values which are mathematically equal compare
// equal, with no floating-point drift; conversions to double happen once at
// the very end of a computation.  Intermediates use 128-bit products and are
// reduced eagerly; overflow of the reduced form throws.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string to_string() const;

  Rational operator-() const;
  Rational& operator+=(const Rational& o);
  Rational& operator-=(const Rational& o);
  Rational& operator*=(const Rational& o);
  Rational& operator/=(const Rational& o);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator<(const Rational& o) const;
  bool operator<=(const Rational& o) const { return *this == o || *this < o; }

  Rational abs() const { return num_ < 0 ? -*this : *this; }

 private:
  static Rational reduce128(__int128 num, __int128 den);

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace doshap
