#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace qsynth {

/* exact rational, positive denominator, lowest terms */
class Rational {
public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }

  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string to_string() const;

  /* "p/q", integers and finite decimals ("0.5" is exactly 1/2) */
  static Rational parse(std::string_view text);

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct Fraction128 {
  __int128 num = 0;
  __int128 den = 1;
};
/* fraction of smallest denominator in [lo, hi], by Stern-Brocot descent; den > 0 */
Fraction128 simplest_between(Fraction128 lo, Fraction128 hi);

}  // namespace qsynth
