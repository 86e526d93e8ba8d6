#include "qsynth/rational.hpp"

#include <charconv>
#include <numeric>

#include "qsynth/errors.hpp"

namespace qsynth {

namespace {

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("not an integer: '" + std::string(text) + "'");
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  return s;
}

__int128 floor_div(__int128 a, __int128 b) {
  __int128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0)))
    --q;
  return q;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0)
    throw ContractViolation("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

std::string Rational::to_string() const {
  if (den_ == 1)
    return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::parse(std::string_view text) {
  text = trim(text);
  if (text.empty())
    throw ConfigError("empty rational");
  if (auto slash = text.find('/'); slash != std::string_view::npos)
    return Rational(parse_int(trim(text.substr(0, slash))), parse_int(trim(text.substr(slash + 1))));
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = text.substr(dot + 1);
    if (frac.size() > 15)
      throw ConfigError("too many decimals: '" + std::string(text) + "'");
    bool negative = !whole.empty() && whole.front() == '-';
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i)
      scale *= 10;
    std::int64_t w = whole.empty() || whole == "-" ? 0 : parse_int(whole);
    std::int64_t f = frac.empty() ? 0 : parse_int(frac);
    if (f < 0)
      throw ConfigError("malformed decimal: '" + std::string(text) + "'");
    std::int64_t num = (w < 0 ? -w : w) * scale + f;
    return Rational(negative ? -num : num, scale);
  }
  return Rational(parse_int(text), 1);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
  __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
  if (lhs < rhs)
    return std::strong_ordering::less;
  if (lhs > rhs)
    return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return Rational(a.num_ * b.num_, a.den_ * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0)
    throw ContractViolation("Rational: division by zero");
  return Rational(a.num_ * b.den_, a.den_ * b.num_);
}

Fraction128 simplest_between(Fraction128 lo, Fraction128 hi) {
  /* continued-fraction descent; x = (p1*y + p0) / (q1*y + q0) maps the
   * reduced variable y back to the original interval */
  __int128 p1 = 1, p0 = 0, q1 = 0, q0 = 1;
  for (int guard = 0; guard < 512; ++guard) {
    __int128 k = floor_div(lo.num, lo.den);
    __int128 up = (lo.num % lo.den == 0) ? k : k + 1;
    if (up * hi.den <= hi.num) {
      /* x = up in reduced coordinates */
      __int128 num = p1 * up + p0;
      __int128 den = q1 * up + q0;
      if (den < 0) {
        num = -num;
        den = -den;
      }
      return {num, den};
    }
    /* lo, hi both inside (k, k+1): x = k + 1/y with y in [1/(hi-k), 1/(lo-k)] */
    Fraction128 new_lo{hi.den, hi.num - k * hi.den};
    Fraction128 new_hi{lo.den, lo.num - k * lo.den};
    __int128 np = p1 * k + p0, nq = q1 * k + q0;
    p0 = p1;
    q0 = q1;
    p1 = np;
    q1 = nq;
    lo = new_lo;
    hi = new_hi;
  }
  throw ContractViolation("simplest_between: no convergence");
}

}  // namespace qsynth
