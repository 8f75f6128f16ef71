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

// Polynomial-time approximation of optimal composition.
//
// Every epsilon_i is rounded up to a multiple a_i of eps0 = ln(1 + beta),
// where beta = eta / (k (1 + mean eps) + 1). Because e^eps0 = 1 + beta is
// rational, deciding whether the rounded instance is (a * eps0, delta_g)-DP
// reduces to two weighted knapsack sums. Binary search over the integer a
// finds the least feasible grid level.

#ifndef DPCOMP_APPROX_HPP_
#define DPCOMP_APPROX_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "dpcomp/composition.hpp"
#include "dpcomp/errors.hpp"
#include "dpcomp/knapsack.hpp"
#include "dpcomp/numerics.hpp"

namespace dpcomp {

enum class ArithmeticMode {
  // Exact rationals throughout; bit lengths grow with a_total.
  exact_rational,
  // MPFR with directed rounding: the left side of the feasibility test is
  // rounded up and the right side down, so "feasible" is never a false
  // positive.
  directed_float,
};

struct ApproxOptions {
  ArithmeticMode mode = ArithmeticMode::directed_float;
  // Largest knapsack capacity (about a_total / 2) accepted before refusing.
  std::uint64_t max_capacity = 50'000'000;
};

/// Grid used to round the epsilons up.
struct Discretization {
  Rational eta;
  Rational beta;
  Rational base;  // 1 + beta, equal to e^{eps0}
  Real epsilon0;        // certified over-approximation of ln(1 + beta), <= beta
  Real epsilon0_lower;  // certified under-approximation of ln(1 + beta)
  std::vector<std::uint64_t> levels;
  std::uint64_t a_total = 0;
};

inline Discretization discretize(const CompositionInstance& instance, const Rational& eta,
                                 const PrecisionConfig& cfg = {}) {
  if (!(eta > 0 && eta < 1)) throw InvalidArgument("eta must lie in (0, 1)");
  const auto k = static_cast<unsigned long>(instance.k());
  Rational beta = eta / (k * (1 + instance.eps_mean()) + 1);
  beta.canonicalize();
  Rational scale = 1 / beta + 1;
  scale.canonicalize();

  std::vector<std::uint64_t> levels;
  levels.reserve(instance.k());
  BigInt total = 0;
  for (const auto& p : instance.params()) {
    Rational x = p.epsilon * scale;
    x.canonicalize();
    const BigInt a = ceil(x);
    if (!a.fits_ulong_p()) throw LimitExceeded("epsilon too large to discretize");
    levels.push_back(a.get_ui());
    total += a;
  }
  if (!total.fits_ulong_p() || total > BigInt(std::numeric_limits<std::uint64_t>::max() / 4)) {
    throw LimitExceeded("discretized instance too large");
  }
  Ln1pBracket eps0 = ln1p_taylor_bracket(beta, cfg);
  Rational base = 1 + beta;
  base.canonicalize();
  return Discretization{eta,       std::move(beta),  std::move(base), std::move(eps0.upper),
                        std::move(eps0.lower), std::move(levels), total.get_ui()};
}

/// Decides OptComp(rounded instance, delta_g) <= a * eps0 for many a, after
/// one knapsack pass of capacity floor(a_total / 2) (or a smaller capacity
/// when only larger a will be asked). Every query is a table lookup at
/// B = floor((a_total - a) / 2).
class FeasibilityOracle {
 public:
  FeasibilityOracle(const Discretization& d, std::span<const Rational> deltas,
                    const Rational& delta_g, const PrecisionConfig& cfg = {},
                    const ApproxOptions& options = {}, std::uint64_t smallest_level = 0)
      : d_(d), mode_(options.mode), precision_(cfg.mpfr_precision()) {
    if (deltas.size() != d.levels.size()) {
      throw InvalidArgument("deltas and discretization levels differ in length");
    }
    Rational survival = 1;
    for (const Rational& del : deltas) {
      if (del < 0 || del >= 1) throw InvalidArgument("delta must lie in [0, 1)");
      survival *= 1 - del;
    }
    survival.canonicalize();
    if (delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
    const Rational threshold = 1 - survival;
    detail::require_feasible(delta_g, threshold);
    rhs_ = 1 - (1 - delta_g) / survival;
    rhs_.canonicalize();
    survival_ = survival;

    capacity_ = smallest_level >= d.a_total ? 0 : (d.a_total - smallest_level) / 2;
    if (capacity_ > options.max_capacity) {
      throw LimitExceeded("knapsack capacity " + std::to_string(capacity_) +
                            " exceeds the configured maximum; raise eta");
    }
    if (mode_ == ArithmeticMode::exact_rational) {
      build_rational();
    } else {
      build_float();
    }
  }

  std::uint64_t capacity() const { return capacity_; }

  bool feasible(std::uint64_t a_star) const {
    if (a_star >= d_.a_total) return true;
    const std::uint64_t b = (d_.a_total - a_star) / 2;
    if (b > capacity_) throw InvalidArgument("grid level below the oracle's range");
    if (mode_ == ArithmeticMode::exact_rational) {
      return lhs_rational(a_star, b) <= rhs_;
    }
    const Real lhs = lhs_upper(a_star, b);
    if (lhs.sign() <= 0) return true;
    return lhs <= Real(rhs_, precision_, Rounding::toward_minus_infinity);
  }

  /// Upper bound on the optimal delta_g of the rounded instance at
  /// epsilon_g = a * eps0.
  Real delta_upper(std::uint64_t a_star) const {
    Real lhs(precision_);
    if (a_star < d_.a_total) {
      const std::uint64_t b = (d_.a_total - a_star) / 2;
      if (b > capacity_) throw InvalidArgument("grid level below the oracle's range");
      if (mode_ == ArithmeticMode::exact_rational) {
        lhs = Real(lhs_rational(a_star, b), precision_, Rounding::toward_plus_infinity);
      } else {
        lhs = lhs_upper(a_star, b);
      }
      if (lhs.sign() < 0) lhs = Real(precision_);
    }
    const Real one(1.0, precision_);
    Real out = add(Real(Rational(1 - survival_), precision_, Rounding::toward_plus_infinity),
                   mul(Real(survival_, precision_, Rounding::toward_plus_infinity), lhs,
                       Rounding::toward_plus_infinity),
                   Rounding::toward_plus_infinity);
    return out > one ? one : out;
  }

 private:
  void build_rational() {
    const std::size_t k = d_.levels.size();
    std::vector<Rational> w_down(k), w_up(k);
    Rational denom = 1;
    for (std::size_t i = 0; i < k; ++i) {
      w_up[i] = rational_power(d_.base, d_.levels[i]);
      w_down[i] = 1 / w_up[i];
      w_down[i].canonicalize();
      denom *= 1 + w_up[i];
    }
    denom.canonicalize();
    auto rows = knapsack_rows<Rational>(d_.levels, capacity_, w_down, Rounding::nearest, w_up,
                                        Rounding::nearest, Rational(1));
    rat_down_ = std::move(rows.first);
    rat_up_ = std::move(rows.second);
    rat_total_power_ = rational_power(d_.base, d_.a_total);
    rat_denominator_ = denom;
  }

  void build_float() {
    constexpr Rounding kUp = Rounding::toward_plus_infinity;
    constexpr Rounding kDown = Rounding::toward_minus_infinity;
    const std::size_t k = d_.levels.size();
    base_up_ = Real(d_.base, precision_, kUp);
    base_down_ = Real(d_.base, precision_, kDown);
    const Real one(1.0, precision_);
    // w_down: base^{-a_i} rounded up; w_up: base^{a_i} rounded down.
    std::vector<Real> w_down, w_up;
    w_down.reserve(k);
    w_up.reserve(k);
    Real denom = one;
    for (std::size_t i = 0; i < k; ++i) {
      Real power_dn = pow(base_down_, d_.levels[i], kDown);
      w_down.push_back(div(one, power_dn, kUp));
      denom = mul(denom, add(one, power_dn, kDown), kDown);
      w_up.push_back(std::move(power_dn));
    }
    denominator_down_ = std::move(denom);
    total_power_up_ = pow(base_up_, d_.a_total, kUp);
    auto rows = knapsack_rows<Real>(d_.levels, capacity_, w_down, kUp, w_up, kDown, one);
    row_down_weights_up_ = std::move(rows.first);
    row_up_weights_down_ = std::move(rows.second);
  }

  // [base^{a_total} F_-(B) - base^{a*} F_+(B)] / prod(1 + base^{a_i}), rounded up.
  Real lhs_upper(std::uint64_t a_star, std::uint64_t b) const {
    constexpr Rounding kUp = Rounding::toward_plus_infinity;
    constexpr Rounding kDown = Rounding::toward_minus_infinity;
    const Real term1 = mul(total_power_up_, row_down_weights_up_[b], kUp);
    const Real term2 = mul(pow(base_down_, a_star, kDown), row_up_weights_down_[b], kDown);
    const Real numerator = sub(term1, term2, kUp);
    if (numerator.sign() <= 0) return numerator;
    return div(numerator, denominator_down_, kUp);
  }

  Rational lhs_rational(std::uint64_t a_star, std::uint64_t b) const {
    Rational num = rat_total_power_ * rat_down_[b] - rational_power(d_.base, a_star) * rat_up_[b];
    Rational lhs = num / rat_denominator_;
    lhs.canonicalize();
    return lhs;
  }

  static Rational rational_power(const Rational& q, std::uint64_t e) {
    BigInt num, den;
    mpz_pow_ui(num.get_mpz_t(), q.get_num_mpz_t(), static_cast<unsigned long>(e));
    mpz_pow_ui(den.get_mpz_t(), q.get_den_mpz_t(), static_cast<unsigned long>(e));
    Rational r(num, den);
    r.canonicalize();
    return r;
  }

  const Discretization& d_;
  ArithmeticMode mode_;
  mpfr_prec_t precision_;
  Rational rhs_;
  Rational survival_;
  std::uint64_t capacity_ = 0;

  Real base_up_, base_down_;
  Real total_power_up_;
  Real denominator_down_;
  std::vector<Real> row_down_weights_up_;
  std::vector<Real> row_up_weights_down_;

  std::vector<Rational> rat_down_, rat_up_;
  Rational rat_total_power_;
  Rational rat_denominator_;
};

/// Whether the rounded instance (a_i * eps0, delta_i) is (a_star * eps0, delta_g)-DP.
inline bool feasibility_check(const Discretization& d, std::span<const Rational> deltas,
                              const Rational& delta_g, std::uint64_t a_star,
                              const PrecisionConfig& cfg = {}, const ApproxOptions& options = {}) {
  const FeasibilityOracle oracle(d, deltas, delta_g, cfg, options, a_star);
  return oracle.feasible(a_star);
}

struct ApproxResult {
  Real epsilon_star;
  std::uint64_t a_star = 0;
  Discretization discretization;
  Rational delta_g;
  // e^{-eta/2} delta_g: the upper side of the guarantee is stated against it.
  Real shrunk_delta_g;
  Rational eta;
};

inline std::vector<Rational> deltas_of(const CompositionInstance& instance) {
  std::vector<Rational> out;
  out.reserve(instance.k());
  for (const auto& p : instance.params()) out.push_back(p.delta);
  return out;
}

/// eps* with OptComp(delta_g) <= eps* <= OptComp(e^{-eta/2} delta_g) + eta.
inline ApproxResult approx_optimal_epsilon(const CompositionInstance& instance, const Rational& delta_g,
                                           const Rational& eta, const PrecisionConfig& cfg = {},
                                           const ApproxOptions& options = {}) {
  cfg.validate();
  if (delta_g < 0 || delta_g >= 1) throw InvalidArgument("delta_g must lie in [0, 1)");
  detail::require_feasible(delta_g, instance.feasibility_threshold());
  Discretization d = discretize(instance, eta, cfg);
  const std::vector<Rational> deltas = deltas_of(instance);
  const FeasibilityOracle oracle(d, deltas, delta_g, cfg, options);

  // a_total is always feasible; search [0, a_total] for the least feasible level.
  std::uint64_t lo = 0;
  std::uint64_t hi = d.a_total;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (oracle.feasible(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const mpfr_prec_t prec = cfg.mpfr_precision();
  Real eps_star(prec);
  if (hi > 0) {
    Real level(prec);
    mpfr_set_ui(level.get(), static_cast<unsigned long>(hi), MPFR_RNDU);
    eps_star = mul(level, d.epsilon0, Rounding::toward_plus_infinity);
  }
  Real half_eta = div(Real(eta, prec), Real(2.0, prec));
  Real shrunk = mul(Real(delta_g, prec), exp(-half_eta));
  return ApproxResult{std::move(eps_star), hi,      std::move(d), delta_g,
                      std::move(shrunk),   eta};
}

/// Upper bound on the optimal delta_g at epsilon_g, from the rounded-up
/// instance evaluated at the largest grid level not exceeding epsilon_g.
inline Real approx_delta_of_epsilon(const CompositionInstance& instance, const Real& epsilon_g,
                                    const Rational& eta, const PrecisionConfig& cfg = {},
                                    const ApproxOptions& options = {}) {
  cfg.validate();
  if (epsilon_g.sign() < 0) throw InvalidArgument("epsilon_g must be non-negative");
  const Discretization d = discretize(instance, eta, cfg);
  Real level = div(epsilon_g, d.epsilon0, Rounding::toward_minus_infinity);
  mpfr_floor(level.get(), level.get());
  std::uint64_t a = d.a_total;
  if (level < Real(static_cast<double>(d.a_total), level.precision())) {
    a = static_cast<std::uint64_t>(mpfr_get_ui(level.get(), MPFR_RNDD));
  }
  const std::vector<Rational> deltas = deltas_of(instance);
  // Any delta_g >= the threshold is accepted here; the bound is what matters.
  const FeasibilityOracle oracle(d, deltas, instance.feasibility_threshold(), cfg, options, a);
  return oracle.delta_upper(a);
}

}  // namespace dpcomp

#endif  // DPCOMP_APPROX_HPP_
