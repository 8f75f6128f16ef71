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

// Closed-form and exact (exponential-time) composition of (epsilon, delta)
// guarantees, in both directions: delta_g given epsilon_g, and the least
// epsilon_g given delta_g.

#ifndef DPCOMP_COMPOSITION_HPP_
#define DPCOMP_COMPOSITION_HPP_

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpcomp/errors.hpp"
#include "dpcomp/numerics.hpp"

namespace dpcomp {

inline constexpr std::size_t kDefaultEnumerationLimit = 25;

/// One mechanism's guarantee: epsilon >= 0, 0 <= delta < 1.
struct PrivacyParams {
  Rational epsilon;
  Rational delta;

  PrivacyParams(Rational eps, Rational del) : epsilon(std::move(eps)), delta(std::move(del)) {
    epsilon.canonicalize();
    delta.canonicalize();
    if (epsilon < 0) throw InvalidArgument("epsilon must be non-negative");
    if (delta < 0 || delta >= 1) throw InvalidArgument("delta must lie in [0, 1)");
  }
};

/// Ordered list of mechanisms with cached exact aggregates.
class CompositionInstance {
 public:
  explicit CompositionInstance(std::vector<PrivacyParams> params) : params_(std::move(params)) {
    if (params_.empty()) throw InvalidArgument("a composition needs at least one mechanism");
    eps_sum_ = 0;
    delta_survival_ = 1;
    for (const auto& p : params_) {
      eps_sum_ += p.epsilon;
      delta_survival_ *= 1 - p.delta;
    }
    eps_sum_.canonicalize();
    delta_survival_.canonicalize();
    eps_mean_ = eps_sum_ / static_cast<unsigned long>(params_.size());
    eps_mean_.canonicalize();
  }

  static CompositionInstance homogeneous(const PrivacyParams& p, std::size_t k) {
    if (k == 0) throw InvalidArgument("k must be positive");
    return CompositionInstance(std::vector<PrivacyParams>(k, p));
  }

  std::size_t k() const { return params_.size(); }
  std::span<const PrivacyParams> params() const { return params_; }
  const PrivacyParams& operator[](std::size_t i) const { return params_[i]; }

  const Rational& eps_sum() const { return eps_sum_; }
  const Rational& eps_mean() const { return eps_mean_; }
  // prod(1 - delta_i), in (0, 1].
  const Rational& delta_survival() const { return delta_survival_; }
  // Smallest delta_g for which some finite epsilon_g exists.
  Rational feasibility_threshold() const {
    Rational t = 1 - delta_survival_;
    t.canonicalize();
    return t;
  }

  bool is_homogeneous() const {
    return std::all_of(params_.begin(), params_.end(), [&](const PrivacyParams& p) {
      return p.epsilon == params_.front().epsilon && p.delta == params_.front().delta;
    });
  }

  std::vector<Real> epsilons(mpfr_prec_t precision) const {
    std::vector<Real> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.emplace_back(p.epsilon, precision);
    return out;
  }

 private:
  std::vector<PrivacyParams> params_;
  Rational eps_sum_;
  Rational eps_mean_;
  Rational delta_survival_;
};

enum class Method { basic, advanced, homogeneous_optimal, exact_optimal, approx_optimal };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::basic:
      return "basic";
    case Method::advanced:
      return "advanced";
    case Method::homogeneous_optimal:
      return "homogeneous-optimal";
    case Method::exact_optimal:
      return "exact-optimal";
    case Method::approx_optimal:
      return "approx-optimal";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::basic, Method::advanced, Method::homogeneous_optimal,
                   Method::exact_optimal, Method::approx_optimal}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

struct Bracket {
  Real lower;
  Real upper;
};

struct GuaranteeResult {
  Real epsilon_g;
  Real delta_g;
  Method method = Method::basic;
  std::optional<Bracket> bracket;
  PrecisionConfig precision;
  // The guarantee is meaningless (delta_g >= 1, or dominated by summing).
  bool vacuous = false;
  // Basic composition applied to unequal parameters.
  bool heterogeneous_extension = false;
};

namespace detail {

inline void require_feasible(const Rational& delta_g, const Rational& threshold) {
  if (delta_g < threshold) {
    throw InfeasibleDelta(threshold.get_d(),
                          "delta_g is below the feasibility threshold 1 - prod(1 - delta_i) = " +
                              to_decimal_string(threshold));
  }
}

// (1 - survival) + survival * normalized_sum, which avoids cancellation for
// small delta_g.
inline Real delta_from_normalized_sum(const Rational& survival, const Real& normalized_sum) {
  const mpfr_prec_t p = normalized_sum.precision();
  Real base(Rational(1 - survival), p);
  return add(base, mul(Real(survival, p), normalized_sum));
}

// Least x in [lo, hi] with feasible(x), given feasible(hi). Stops when the
// bracket is narrower than 2^-target_bits.
template <class Pred>
Bracket bisect_least_feasible(Real lo, Real hi, unsigned target_bits, Pred&& feasible) {
  Real width_limit(1.0, hi.precision());
  mpfr_mul_2si(width_limit.get(), width_limit.get(), -static_cast<long>(target_bits), MPFR_RNDN);
  Real mid(hi.precision());
  while (sub(hi, lo) >= width_limit) {
    mpfr_add(mid.get(), lo.get(), hi.get(), MPFR_RNDN);
    mpfr_div_2ui(mid.get(), mid.get(), 1, MPFR_RNDN);
    if (mid == lo || mid == hi) break;
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {std::move(lo), std::move(hi)};
}

inline GuaranteeResult vacuous_result(Method m, const Rational& delta_g, const PrecisionConfig& cfg) {
  const mpfr_prec_t p = cfg.mpfr_precision();
  GuaranteeResult r{Real(p), Real(delta_g, p), m, Bracket{Real(p), Real(p)}, cfg, true, false};
  return r;
}

}  // namespace detail

/// Sum of epsilons and deltas. Heterogeneous inputs are flagged in the result.
inline GuaranteeResult basic_compose(const CompositionInstance& instance,
                                     const PrecisionConfig& cfg = {}) {
  Rational delta_sum = 0;
  for (const auto& p : instance.params()) delta_sum += p.delta;
  delta_sum.canonicalize();
  const mpfr_prec_t prec = cfg.mpfr_precision();
  GuaranteeResult r{Real(instance.eps_sum(), prec), Real(delta_sum, prec), Method::basic,
                    std::nullopt, cfg, delta_sum >= 1, !instance.is_homogeneous()};
  return r;
}

/// Advanced composition for k copies of (epsilon, delta) with slack delta_prime.
inline GuaranteeResult advanced_compose(const Rational& epsilon, const Rational& delta, std::size_t k,
                                        const Rational& delta_prime, const PrecisionConfig& cfg = {}) {
  const PrivacyParams params(epsilon, delta);
  if (k == 0) throw InvalidArgument("k must be positive");
  if (delta_prime <= 0) throw InvalidArgument("delta_prime must be positive");
  const mpfr_prec_t prec = cfg.mpfr_precision();
  const Real eps(params.epsilon, prec);
  const Real kk(static_cast<double>(k), prec);

  // ln(1/delta') clamped at zero for delta' >= 1 (already vacuous).
  Real log_inv = -log(Real(delta_prime, prec));
  if (log_inv.sign() < 0) log_inv = Real(prec);
  Real eps_g = add(mul(sqrt(mul(mul(Real(2.0, prec), kk), log_inv)), eps),
                   mul(mul(kk, eps), expm1(eps)));
  Rational delta_g = static_cast<unsigned long>(k) * params.delta + delta_prime;
  delta_g.canonicalize();
  const Rational k_eps = static_cast<unsigned long>(k) * params.epsilon;
  const bool vacuous = eps_g > k_eps || delta_g >= 1;
  GuaranteeResult r{std::move(eps_g), Real(delta_g, prec), Method::advanced, std::nullopt, cfg,
                    vacuous, false};
  return r;
}

/// Inverse direction of advanced composition: the delta_g that the advanced
/// bound certifies at a given epsilon_g (1 when it certifies nothing).
inline Real advanced_delta_of_epsilon(const Rational& epsilon, const Rational& delta, std::size_t k,
                                      const Real& epsilon_g, const PrecisionConfig& cfg = {}) {
  const PrivacyParams params(epsilon, delta);
  if (k == 0) throw InvalidArgument("k must be positive");
  const mpfr_prec_t prec = cfg.mpfr_precision();
  const Real one(1.0, prec);
  if (params.epsilon == 0) return Real(Rational(static_cast<unsigned long>(k) * params.delta), prec);
  const Real eps(params.epsilon, prec);
  const Real kk(static_cast<double>(k), prec);
  const Real drift = mul(mul(kk, eps), expm1(eps));
  if (!(epsilon_g > drift)) return one;
  // ln(1/delta') = ((eps_g - drift) / eps)^2 / (2k)
  Real root = div(sub(epsilon_g, drift), eps);
  Real log_inv = div(mul(root, root), mul(Real(2.0, prec), kk));
  Real delta_prime = exp(-log_inv);
  Real total = add(Real(Rational(static_cast<unsigned long>(k) * params.delta), prec), delta_prime);
  return total >= one ? one : total;
}

/// Least delta_g at epsilon_g for k copies of (epsilon, delta), from the
/// binomial form of the optimal homogeneous bound. Terms are accumulated in
/// log domain with exact binomial coefficients.
inline Real homogeneous_delta_of_epsilon(const Rational& epsilon, const Rational& delta, std::size_t k,
                                         const Real& epsilon_g, const PrecisionConfig& cfg = {}) {
  const PrivacyParams params(epsilon, delta);
  if (k == 0) throw InvalidArgument("k must be positive");
  if (epsilon_g.sign() < 0) throw InvalidArgument("epsilon_g must be non-negative");
  const mpfr_prec_t prec = cfg.mpfr_precision();
  Rational survival = 1;
  {
    mpq_class base = 1 - params.delta;
    for (std::size_t i = 0; i < k; ++i) survival *= base;
    survival.canonicalize();
  }
  if (params.epsilon == 0) {
    return Real(Rational(1 - survival), prec);
  }
  const Real eps(params.epsilon, prec);
  const Real kk(static_cast<double>(k), prec);
  // first l with l * eps >= eps_g + (k - l) * eps
  Real start = div(add(epsilon_g, mul(kk, eps)), mul(Real(2.0, prec), eps));
  mpfr_ceil(start.get(), start.get());
  if (start > kk) return Real(Rational(1 - survival), prec);
  const std::size_t first =
      start.sign() <= 0 ? 0 : static_cast<std::size_t>(mpfr_get_ui(start.get(), MPFR_RNDN));

  Real log_sum = Real::neg_infinity(prec);
  Real a(prec), b(prec), ll(prec);
  for (std::size_t l = first; l <= k; ++l) {
    mpfr_set_ui(ll.get(), static_cast<unsigned long>(l), MPFR_RNDN);
    a = mul(ll, eps);
    b = add(epsilon_g, mul(sub(kk, ll), eps));
    if (!(a > b)) continue;
    Real term = add(log(Real(binomial(k, l), prec)), log_diff_exp(a, b));
    log_sum = log_add_exp(log_sum, term);
  }
  if (log_sum.is_neg_infinity()) return Real(Rational(1 - survival), prec);
  Real normalized = exp(sub(log_sum, mul(kk, softplus(eps))));
  return detail::delta_from_normalized_sum(survival, normalized);
}

/// Least epsilon_g with homogeneous_delta_of_epsilon <= delta_g, by bisection
/// over [0, k * epsilon].
inline GuaranteeResult homogeneous_optimal_epsilon(const Rational& epsilon, const Rational& delta,
                                                   std::size_t k, const Rational& delta_g,
                                                   const PrecisionConfig& cfg = {}) {
  cfg.validate();
  const PrivacyParams params(epsilon, delta);
  if (k == 0) throw InvalidArgument("k must be positive");
  if (delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
  if (delta_g >= 1) return detail::vacuous_result(Method::homogeneous_optimal, delta_g, cfg);
  Rational survival = 1;
  for (std::size_t i = 0; i < k; ++i) survival *= 1 - params.delta;
  survival.canonicalize();
  const Rational threshold = 1 - survival;
  detail::require_feasible(delta_g, threshold);

  const mpfr_prec_t prec = cfg.mpfr_precision();
  const Rational k_eps = static_cast<unsigned long>(k) * params.epsilon;
  Real upper(k_eps, prec, Rounding::toward_plus_infinity);
  GuaranteeResult r{Real(prec), Real(delta_g, prec), Method::homogeneous_optimal, std::nullopt, cfg,
                    false, false};
  if (delta_g == threshold) {
    r.epsilon_g = upper;
    r.bracket = Bracket{upper, upper};
    return r;
  }
  auto feasible = [&](const Real& eg) {
    return homogeneous_delta_of_epsilon(params.epsilon, params.delta, k, eg, cfg) <= delta_g;
  };
  Real zero(prec);
  if (feasible(zero)) {
    r.bracket = Bracket{zero, zero};
    return r;
  }
  Bracket br = detail::bisect_least_feasible(zero, upper, cfg.target_bits, feasible);
  r.epsilon_g = br.upper;
  r.bracket = std::move(br);
  return r;
}

/// delta_g(epsilon_g) for a heterogeneous composition by full subset
/// enumeration in Gray-code order. Subset terms are carried as normalized
/// probabilities x_S = e^{sum_S eps} / prod(1 + e^eps_i) and
/// y_S = e^{sum_{not S} eps} / prod(1 + e^eps_i); each Gray step flips one
/// mechanism and multiplies both by e^{+-eps_i}.
inline Real exact_delta_of_epsilon(const CompositionInstance& instance, const Real& epsilon_g,
                                   const PrecisionConfig& cfg = {},
                                   std::size_t enumeration_limit = kDefaultEnumerationLimit) {
  const std::size_t k = instance.k();
  if (k > enumeration_limit || k >= 63) throw EnumerationTooLarge(k, enumeration_limit);
  if (epsilon_g.sign() < 0) throw InvalidArgument("epsilon_g must be non-negative");
  const mpfr_prec_t prec = cfg.mpfr_precision() + 16;
  const std::vector<Real> eps = instance.epsilons(prec);

  std::vector<Real> up, down;  // e^{eps_i}, e^{-eps_i}
  Real x(1.0, prec), y(1.0, prec);
  for (const Real& e : eps) {
    up.push_back(exp(e));
    down.push_back(exp(-e));
    Real denom = add(Real(1.0, prec), up.back());
    x = div(x, denom);
    y = mul(y, div(up.back(), denom));
  }
  Real c(prec);
  mpfr_exp(c.get(), epsilon_g.get(), MPFR_RNDN);

  Real acc(prec), cy(prec);
  auto accumulate = [&] {
    mpfr_mul(cy.get(), c.get(), y.get(), MPFR_RNDN);
    if (x > cy) {
      mpfr_add(acc.get(), acc.get(), x.get(), MPFR_RNDN);
      mpfr_sub(acc.get(), acc.get(), cy.get(), MPFR_RNDN);
    }
  };
  accumulate();
  const std::uint64_t count = std::uint64_t{1} << k;
  for (std::uint64_t g = 1; g < count; ++g) {
    const int i = std::countr_zero(g);
    const bool entering = ((g ^ (g >> 1)) >> i) & 1U;
    if (entering) {
      mpfr_mul(x.get(), x.get(), up[i].get(), MPFR_RNDN);
      mpfr_mul(y.get(), y.get(), down[i].get(), MPFR_RNDN);
    } else {
      mpfr_mul(x.get(), x.get(), down[i].get(), MPFR_RNDN);
      mpfr_mul(y.get(), y.get(), up[i].get(), MPFR_RNDN);
    }
    accumulate();
  }
  Real out = detail::delta_from_normalized_sum(instance.delta_survival(), acc);
  Real rounded(cfg.mpfr_precision());
  mpfr_set(rounded.get(), out.get(), MPFR_RNDN);
  return rounded;
}

/// Split-half table of all subset terms for repeated delta(epsilon_g)
/// queries. Every subset S = A u B of the two halves contributes
/// x_A x_B - e^{eps_g} y_A y_B exactly when u_A + u_B > eps_g, where
/// u = 2 * sum_S eps - sum_half eps. Sorting one half by u turns each query
/// into 2^{k/2} binary searches over prefix sums.
class SubsetSumProfile {
 public:
  SubsetSumProfile(const CompositionInstance& instance, const PrecisionConfig& cfg,
                   std::size_t enumeration_limit = kDefaultEnumerationLimit)
      : survival_(instance.delta_survival()), precision_(cfg.mpfr_precision() + 16) {
    const std::size_t k = instance.k();
    if (k > enumeration_limit || k >= 63) throw EnumerationTooLarge(k, enumeration_limit);
    const std::vector<Real> eps = instance.epsilons(precision_);
    const std::size_t half = k / 2;
    left_ = enumerate_half(std::span<const Real>(eps).first(half));
    right_ = enumerate_half(std::span<const Real>(eps).subspan(half));
    std::sort(right_.begin(), right_.end(),
              [](const Entry& a, const Entry& b) { return a.u > b.u; });
    prefix_x_.reserve(right_.size() + 1);
    prefix_y_.reserve(right_.size() + 1);
    prefix_x_.emplace_back(precision_);
    prefix_y_.emplace_back(precision_);
    for (const Entry& e : right_) {
      prefix_x_.push_back(add(prefix_x_.back(), e.x));
      prefix_y_.push_back(add(prefix_y_.back(), e.y));
    }
  }

  Real delta(const Real& epsilon_g) const {
    Real c(precision_);
    mpfr_exp(c.get(), epsilon_g.get(), MPFR_RNDN);
    Real acc(precision_), threshold(precision_), t1(precision_), t2(precision_);
    for (const Entry& a : left_) {
      mpfr_sub(threshold.get(), epsilon_g.get(), a.u.get(), MPFR_RNDN);
      // number of right entries with u_B > threshold (right_ sorted descending)
      const auto it = std::partition_point(right_.begin(), right_.end(),
                                           [&](const Entry& b) { return b.u > threshold; });
      const auto j = static_cast<std::size_t>(it - right_.begin());
      if (j == 0) continue;
      mpfr_mul(t1.get(), a.x.get(), prefix_x_[j].get(), MPFR_RNDN);
      mpfr_mul(t2.get(), a.y.get(), prefix_y_[j].get(), MPFR_RNDN);
      mpfr_mul(t2.get(), t2.get(), c.get(), MPFR_RNDN);
      mpfr_add(acc.get(), acc.get(), t1.get(), MPFR_RNDN);
      mpfr_sub(acc.get(), acc.get(), t2.get(), MPFR_RNDN);
    }
    if (acc.sign() < 0) acc = Real(precision_);
    return detail::delta_from_normalized_sum(survival_, acc);
  }

 private:
  struct Entry {
    Real u;
    Real x;
    Real y;
  };

  std::vector<Entry> enumerate_half(std::span<const Real> eps) const {
    const std::size_t n = eps.size();
    std::vector<Real> p, q;  // e^eps/(1+e^eps), 1/(1+e^eps)
    Real total(precision_);
    for (const Real& e : eps) {
      Real up = exp(e);
      Real denom = add(Real(1.0, precision_), up);
      p.push_back(div(up, denom));
      q.push_back(div(Real(1.0, precision_), denom));
      total = add(total, e);
    }
    std::vector<Entry> out;
    out.reserve(std::size_t{1} << n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      Real sigma(precision_), x(1.0, precision_), y(1.0, precision_);
      for (std::size_t i = 0; i < n; ++i) {
        if ((mask >> i) & 1U) {
          sigma = add(sigma, eps[i]);
          x = mul(x, p[i]);
          y = mul(y, q[i]);
        } else {
          x = mul(x, q[i]);
          y = mul(y, p[i]);
        }
      }
      Real u = sub(add(sigma, sigma), total);
      out.push_back(Entry{std::move(u), std::move(x), std::move(y)});
    }
    return out;
  }

  Rational survival_;
  mpfr_prec_t precision_;
  std::vector<Entry> left_;
  std::vector<Entry> right_;
  std::vector<Real> prefix_x_;
  std::vector<Real> prefix_y_;
};

/// Least epsilon_g satisfying the optimal heterogeneous bound at delta_g,
/// by bisection over [0, sum eps_i].
inline GuaranteeResult exact_optimal_epsilon(const CompositionInstance& instance, const Rational& delta_g,
                                             const PrecisionConfig& cfg = {},
                                             std::size_t enumeration_limit = kDefaultEnumerationLimit) {
  cfg.validate();
  if (instance.k() > enumeration_limit) throw EnumerationTooLarge(instance.k(), enumeration_limit);
  if (delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
  if (delta_g >= 1) return detail::vacuous_result(Method::exact_optimal, delta_g, cfg);
  detail::require_feasible(delta_g, instance.feasibility_threshold());

  const mpfr_prec_t prec = cfg.mpfr_precision();
  Real upper(instance.eps_sum(), prec, Rounding::toward_plus_infinity);
  GuaranteeResult r{Real(prec), Real(delta_g, prec), Method::exact_optimal, std::nullopt, cfg, false,
                    false};
  if (delta_g == instance.feasibility_threshold()) {
    r.epsilon_g = upper;
    r.bracket = Bracket{upper, upper};
    return r;
  }
  const SubsetSumProfile profile(instance, cfg, enumeration_limit);
  auto feasible = [&](const Real& eg) { return profile.delta(eg) <= delta_g; };
  Real zero(prec);
  if (feasible(zero)) {
    r.bracket = Bracket{zero, zero};
    return r;
  }
  Bracket br = detail::bisect_least_feasible(zero, upper, cfg.target_bits, feasible);
  r.epsilon_g = br.upper;
  r.bracket = std::move(br);
  return r;
}

}  // namespace dpcomp

#endif  // DPCOMP_COMPOSITION_HPP_
