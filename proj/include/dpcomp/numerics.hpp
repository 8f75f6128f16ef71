// Copyright 2026 The dpcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Precision-controlled scalar primitives shared by every composition path.
//
// Real wraps an MPFR value with an explicit mantissa width. Operators round
// to nearest; the free functions take a Rounding so callers can build
// one-sided bounds. Rational is GMP's mpq_class and carries user inputs
// exactly.

#ifndef DPCOMP_NUMERICS_HPP_
#define DPCOMP_NUMERICS_HPP_

#include <gmpxx.h>
#include <mpfr.h>

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "dpcomp/errors.hpp"

namespace dpcomp {

using Rational = mpq_class;
using BigInt = mpz_class;

enum class Rounding { nearest, toward_plus_infinity, toward_minus_infinity };

inline mpfr_rnd_t to_mpfr(Rounding r) {
  switch (r) {
    case Rounding::toward_plus_infinity:
      return MPFR_RNDU;
    case Rounding::toward_minus_infinity:
      return MPFR_RNDD;
    case Rounding::nearest:
      break;
  }
  return MPFR_RNDN;
}

// The rounding that bounds the other side.
inline Rounding opposite(Rounding r) {
  switch (r) {
    case Rounding::toward_plus_infinity:
      return Rounding::toward_minus_infinity;
    case Rounding::toward_minus_infinity:
      return Rounding::toward_plus_infinity;
    case Rounding::nearest:
      break;
  }
  return Rounding::nearest;
}

inline std::string_view rounding_name(Rounding r) {
  switch (r) {
    case Rounding::toward_plus_infinity:
      return "toward_plus_infinity";
    case Rounding::toward_minus_infinity:
      return "toward_minus_infinity";
    case Rounding::nearest:
      break;
  }
  return "nearest";
}

inline constexpr unsigned kDefaultPrecisionBits = 128;
inline constexpr unsigned kDefaultTargetBits = 53;
inline constexpr unsigned kGuardBits = 32;

/// Working and requested precision for one computation.
///
/// `precision_bits` is the MPFR mantissa width used internally;
/// `target_bits` is the number of output bits q a bisection refines to.
struct PrecisionConfig {
  unsigned precision_bits = kDefaultPrecisionBits;
  unsigned target_bits = kDefaultTargetBits;
  Rounding rounding_mode = Rounding::nearest;

  void validate() const {
    if (target_bits < 1) {
      throw InvalidArgument("target_bits must be at least 1");
    }
    if (precision_bits < target_bits + kGuardBits) {
      throw InvalidArgument("precision_bits must be at least target_bits + " +
                            std::to_string(kGuardBits));
    }
    if (precision_bits > MPFR_PREC_MAX) {
      throw InvalidArgument("precision_bits too large");
    }
  }

  mpfr_prec_t mpfr_precision() const { return static_cast<mpfr_prec_t>(precision_bits); }
};

class Real {
 public:
  Real() : Real(static_cast<mpfr_prec_t>(kDefaultPrecisionBits)) {}
  explicit Real(mpfr_prec_t precision) {
    mpfr_init2(value_, precision);
    mpfr_set_zero(value_, 1);
  }
  Real(double v, mpfr_prec_t precision) {
    mpfr_init2(value_, precision);
    mpfr_set_d(value_, v, MPFR_RNDN);
  }
  Real(const Rational& q, mpfr_prec_t precision, Rounding rnd = Rounding::nearest) {
    mpfr_init2(value_, precision);
    mpfr_set_q(value_, q.get_mpq_t(), to_mpfr(rnd));
  }
  Real(const BigInt& z, mpfr_prec_t precision, Rounding rnd = Rounding::nearest) {
    mpfr_init2(value_, precision);
    mpfr_set_z(value_, z.get_mpz_t(), to_mpfr(rnd));
  }

  Real(const Real& other) {
    mpfr_init2(value_, mpfr_get_prec(other.value_));
    mpfr_set(value_, other.value_, MPFR_RNDN);
  }
  Real(Real&& other) noexcept {
    mpfr_init2(value_, mpfr_get_prec(other.value_));
    mpfr_swap(value_, other.value_);
  }
  Real& operator=(const Real& other) {
    if (this != &other) {
      mpfr_set_prec(value_, mpfr_get_prec(other.value_));
      mpfr_set(value_, other.value_, MPFR_RNDN);
    }
    return *this;
  }
  Real& operator=(Real&& other) noexcept {
    mpfr_swap(value_, other.value_);
    return *this;
  }
  ~Real() { mpfr_clear(value_); }

  static Real neg_infinity(mpfr_prec_t precision) {
    Real r(precision);
    mpfr_set_inf(r.value_, -1);
    return r;
  }

  mpfr_ptr get() { return value_; }
  mpfr_srcptr get() const { return value_; }
  mpfr_prec_t precision() const { return mpfr_get_prec(value_); }

  double to_double(Rounding rnd = Rounding::nearest) const {
    return mpfr_get_d(value_, to_mpfr(rnd));
  }
  bool is_zero() const { return mpfr_zero_p(value_) != 0; }
  bool is_finite() const { return mpfr_number_p(value_) != 0; }
  bool is_neg_infinity() const { return mpfr_inf_p(value_) != 0 && mpfr_sgn(value_) < 0; }
  int sign() const { return mpfr_sgn(value_); }

  Real& operator+=(const Real& o) { mpfr_add(value_, value_, o.value_, MPFR_RNDN); return *this; }
  Real& operator-=(const Real& o) { mpfr_sub(value_, value_, o.value_, MPFR_RNDN); return *this; }
  Real& operator*=(const Real& o) { mpfr_mul(value_, value_, o.value_, MPFR_RNDN); return *this; }
  Real& operator/=(const Real& o) { mpfr_div(value_, value_, o.value_, MPFR_RNDN); return *this; }

  friend Real operator-(const Real& a) {
    Real r(a.precision());
    mpfr_neg(r.value_, a.value_, MPFR_RNDN);
    return r;
  }

  friend bool operator==(const Real& a, const Real& b) { return mpfr_equal_p(a.value_, b.value_) != 0; }
  friend std::partial_ordering operator<=>(const Real& a, const Real& b) {
    if (mpfr_unordered_p(a.value_, b.value_)) return std::partial_ordering::unordered;
    const int c = mpfr_cmp(a.value_, b.value_);
    return c < 0 ? std::partial_ordering::less
                 : (c > 0 ? std::partial_ordering::greater : std::partial_ordering::equivalent);
  }
  friend bool operator==(const Real& a, const Rational& q) { return mpfr_cmp_q(a.value_, q.get_mpq_t()) == 0; }
  friend std::partial_ordering operator<=>(const Real& a, const Rational& q) {
    if (mpfr_nan_p(a.value_)) return std::partial_ordering::unordered;
    const int c = mpfr_cmp_q(a.value_, q.get_mpq_t());
    return c < 0 ? std::partial_ordering::less
                 : (c > 0 ? std::partial_ordering::greater : std::partial_ordering::equivalent);
  }

 private:
  mpfr_t value_;
};

inline mpfr_prec_t wider(const Real& a, const Real& b) {
  return std::max(a.precision(), b.precision());
}

inline Real add(const Real& a, const Real& b, Rounding rnd = Rounding::nearest) {
  Real r(wider(a, b));
  mpfr_add(r.get(), a.get(), b.get(), to_mpfr(rnd));
  return r;
}
inline Real sub(const Real& a, const Real& b, Rounding rnd = Rounding::nearest) {
  Real r(wider(a, b));
  mpfr_sub(r.get(), a.get(), b.get(), to_mpfr(rnd));
  return r;
}
inline Real mul(const Real& a, const Real& b, Rounding rnd = Rounding::nearest) {
  Real r(wider(a, b));
  mpfr_mul(r.get(), a.get(), b.get(), to_mpfr(rnd));
  return r;
}
inline Real div(const Real& a, const Real& b, Rounding rnd = Rounding::nearest) {
  Real r(wider(a, b));
  mpfr_div(r.get(), a.get(), b.get(), to_mpfr(rnd));
  return r;
}
inline Real exp(const Real& a, Rounding rnd = Rounding::nearest) {
  Real r(a.precision());
  mpfr_exp(r.get(), a.get(), to_mpfr(rnd));
  return r;
}
inline Real log(const Real& a, Rounding rnd = Rounding::nearest) {
  Real r(a.precision());
  mpfr_log(r.get(), a.get(), to_mpfr(rnd));
  return r;
}
inline Real log1p(const Real& a, Rounding rnd = Rounding::nearest) {
  Real r(a.precision());
  mpfr_log1p(r.get(), a.get(), to_mpfr(rnd));
  return r;
}
inline Real expm1(const Real& a, Rounding rnd = Rounding::nearest) {
  Real r(a.precision());
  mpfr_expm1(r.get(), a.get(), to_mpfr(rnd));
  return r;
}
inline Real sqrt(const Real& a, Rounding rnd = Rounding::nearest) {
  Real r(a.precision());
  mpfr_sqrt(r.get(), a.get(), to_mpfr(rnd));
  return r;
}
inline Real pow(const Real& base, unsigned long exponent, Rounding rnd = Rounding::nearest) {
  Real r(base.precision());
  mpfr_pow_ui(r.get(), base.get(), exponent, to_mpfr(rnd));
  return r;
}

inline Real operator+(const Real& a, const Real& b) { return add(a, b); }
inline Real operator-(const Real& a, const Real& b) { return sub(a, b); }
inline Real operator*(const Real& a, const Real& b) { return mul(a, b); }
inline Real operator/(const Real& a, const Real& b) { return div(a, b); }

// acc <- acc + w * x with one rounding. Customization point for the
// knapsack dynamic program; the Rational and double overloads are exact or
// round-to-nearest respectively.
inline void multiply_add(Real& acc, const Real& w, const Real& x, Rounding rnd) {
  mpfr_fma(acc.get(), w.get(), x.get(), acc.get(), to_mpfr(rnd));
}
inline void multiply_add(Rational& acc, const Rational& w, const Rational& x, Rounding) {
  acc += w * x;
}
inline void multiply_add(double& acc, double w, double x, Rounding) { acc += w * x; }

inline std::string to_string(const Real& x, int significant_digits = 20) {
  if (x.is_neg_infinity()) return "-inf";
  std::string buf(static_cast<std::size_t>(significant_digits) + 32, '\0');
  const std::string fmt = "%." + std::to_string(significant_digits) + "Rg";
  const int n = mpfr_snprintf(buf.data(), buf.size(), fmt.c_str(), x.get());
  buf.resize(static_cast<std::size_t>(std::max(n, 0)));
  return buf;
}

// Parses "12", "-0.25", "1e-9", "3.5E+2" or "p/q" into an exact rational.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&]() -> Rational {
    throw InvalidArgument("not a decimal number: '" + std::string(text) + "'");
  };
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view s = trim(text);
  if (s.empty()) return fail();

  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw InvalidArgument("zero denominator in '" + std::string(text) + "'");
    Rational q = num / den;
    q.canonicalize();
    return q;
  }

  bool negative = false;
  if (s.front() == '+' || s.front() == '-') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::string digits;
  long scale = 0;
  bool seen_digit = false;
  bool seen_point = false;
  std::size_t i = 0;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      seen_digit = true;
      if (seen_point) --scale;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) return fail();
  if (i < s.size()) {
    if (s[i] != 'e' && s[i] != 'E') return fail();
    std::string_view ex = s.substr(i + 1);
    if (ex.empty()) return fail();
    bool ex_negative = false;
    if (ex.front() == '+' || ex.front() == '-') {
      ex_negative = ex.front() == '-';
      ex.remove_prefix(1);
    }
    if (ex.empty() || ex.size() > 6) return fail();
    long e = 0;
    for (char c : ex) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return fail();
      e = e * 10 + (c - '0');
    }
    scale += ex_negative ? -e : e;
  }
  BigInt mantissa(digits, 10);
  BigInt power;
  mpz_ui_pow_ui(power.get_mpz_t(), 10, static_cast<unsigned long>(scale < 0 ? -scale : scale));
  Rational q = scale < 0 ? Rational(mantissa, power) : Rational(mantissa * power);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

// Shortest-ish decimal rendering of a rational for display; exact when the
// denominator divides a power of ten, else 20 significant digits.
// Exact value of a finite Real.
inline Rational to_rational(const Real& x) {
  if (!x.is_finite()) throw InvalidArgument("cannot convert a non-finite value to a rational");
  Rational q;
  mpfr_get_q(q.get_mpq_t(), x.get());
  return q;
}

inline std::string to_decimal_string(const Rational& q) {
  return to_string(Real(q, 256), 20);
}

/// ln(1 + e^x) with the x + ln(1 + e^-x) branch for positive x.
inline Real softplus(const Real& x) {
  if (x.sign() > 0) {
    return add(x, log1p(exp(-x)));
  }
  return log1p(exp(x));
}

/// ln(e^a - e^b) for a >= b. Returns the negative-infinity sentinel when a == b.
inline Real log_diff_exp(const Real& a, const Real& b) {
  if (!(a >= b)) {
    throw InvalidArgument("log_diff_exp requires a >= b");
  }
  // The result carries guard bits: an absolute error of |y| 2^-p in a log
  // value becomes a relative error of |y| 2^-p after exponentiation.
  const mpfr_prec_t out = wider(a, b) + static_cast<mpfr_prec_t>(kGuardBits);
  const mpfr_prec_t work = out + static_cast<mpfr_prec_t>(kGuardBits);
  if (a == b) return Real::neg_infinity(out);
  Real result(out);
  if (b.is_neg_infinity()) {
    mpfr_set(result.get(), a.get(), MPFR_RNDN);
    return result;
  }
  Real d(work);
  mpfr_sub(d.get(), b.get(), a.get(), MPFR_RNDN);  // d < 0
  Real tail(work);
  // ln(1 - e^d): for d near zero use ln(-expm1(d)), otherwise log1p(-e^d).
  if (mpfr_cmp_d(d.get(), -0.6931471805599453) > 0) {
    mpfr_expm1(tail.get(), d.get(), MPFR_RNDN);
    mpfr_neg(tail.get(), tail.get(), MPFR_RNDN);
    mpfr_log(tail.get(), tail.get(), MPFR_RNDN);
  } else {
    mpfr_exp(tail.get(), d.get(), MPFR_RNDN);
    mpfr_neg(tail.get(), tail.get(), MPFR_RNDN);
    mpfr_log1p(tail.get(), tail.get(), MPFR_RNDN);
  }
  mpfr_add(result.get(), a.get(), tail.get(), MPFR_RNDN);
  return result;
}

// ln(e^a + e^b); either side may be the negative-infinity sentinel.
inline Real log_add_exp(const Real& a, const Real& b) {
  if (a.is_neg_infinity()) return b;
  if (b.is_neg_infinity()) return a;
  const Real& hi = a >= b ? a : b;
  const Real& lo = a >= b ? b : a;
  return add(hi, log1p(exp(sub(lo, hi))));
}

struct Ln1pBracket {
  Real lower;  // even partial sum, rounded down: <= ln(1 + beta)
  Real upper;  // odd partial sum, rounded up:  >= ln(1 + beta), <= beta
  unsigned terms;
};

/// Alternating Taylor series of ln(1 + beta) for rational 0 < beta < 1,
/// stopped once the next term falls below beta * 2^-precision_bits.
/// Partial sums are accumulated with directed rounding so both ends of the
/// returned bracket are certified.
inline Ln1pBracket ln1p_taylor_bracket(const Rational& beta, const PrecisionConfig& cfg) {
  if (!(beta > 0 && beta < 1)) {
    throw InvalidArgument("ln1p_taylor requires 0 < beta < 1");
  }
  const mpfr_prec_t p = cfg.mpfr_precision() + 8;
  const Real beta_up(beta, p, Rounding::toward_plus_infinity);
  const Real beta_dn(beta, p, Rounding::toward_minus_infinity);
  Real threshold = beta_dn;
  mpfr_mul_2si(threshold.get(), threshold.get(), -static_cast<long>(cfg.precision_bits), MPFR_RNDD);

  // power_up/power_dn bracket beta^j; the partial sum for the upper bound
  // adds positive terms rounded up and subtracts negative terms rounded down.
  Real power_up = beta_up;
  Real power_dn = beta_dn;
  Real sum_up = beta_up;  // S_1
  Real sum_dn = beta_dn;
  Real lower(p);
  Real upper = sum_up;
  Real term_up(p), term_dn(p);
  unsigned j = 1;
  for (;;) {
    ++j;
    mpfr_mul(power_up.get(), power_up.get(), beta_up.get(), MPFR_RNDU);
    mpfr_mul(power_dn.get(), power_dn.get(), beta_dn.get(), MPFR_RNDD);
    mpfr_div_ui(term_up.get(), power_up.get(), j, MPFR_RNDU);
    mpfr_div_ui(term_dn.get(), power_dn.get(), j, MPFR_RNDD);
    if (j % 2 == 0) {
      // S_j = S_{j-1} - beta^j / j, an under-estimate.
      mpfr_sub(sum_up.get(), sum_up.get(), term_dn.get(), MPFR_RNDU);
      mpfr_sub(sum_dn.get(), sum_dn.get(), term_up.get(), MPFR_RNDD);
      lower = sum_dn;
    } else {
      mpfr_add(sum_up.get(), sum_up.get(), term_up.get(), MPFR_RNDU);
      mpfr_add(sum_dn.get(), sum_dn.get(), term_dn.get(), MPFR_RNDD);
      upper = sum_up;
      if (term_up < threshold) break;
    }
  }
  // beta itself bounds ln(1 + beta) from above; never report more.
  if (upper > beta) {
    upper = Real(beta, p, Rounding::toward_minus_infinity);
  }
  Real out_upper(cfg.mpfr_precision());
  mpfr_set(out_upper.get(), upper.get(), MPFR_RNDU);
  if (out_upper > beta) mpfr_set_q(out_upper.get(), beta.get_mpq_t(), MPFR_RNDD);
  Real out_lower(cfg.mpfr_precision());
  mpfr_set(out_lower.get(), lower.get(), MPFR_RNDD);
  return {std::move(out_lower), std::move(out_upper), j};
}

/// Over-approximation y of ln(1 + beta) with ln(1 + beta) <= y <= beta.
inline Real ln1p_taylor(const Rational& beta, const PrecisionConfig& cfg = {}) {
  return ln1p_taylor_bracket(beta, cfg).upper;
}

inline BigInt binomial(std::uint64_t k, std::uint64_t l) {
  if (l > k) throw InvalidArgument("binomial requires l <= k");
  BigInt r;
  mpz_bin_uiui(r.get_mpz_t(), static_cast<unsigned long>(k), static_cast<unsigned long>(l));
  return r;
}

// ceil of a non-negative rational.
inline BigInt ceil(const Rational& q) {
  BigInt r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline BigInt floor(const Rational& q) {
  BigInt r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

}  // namespace dpcomp

#endif  // DPCOMP_NUMERICS_HPP_
