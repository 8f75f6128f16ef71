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

// The four-outcome randomized response mechanism that is worst case for
// composition, its sampler, and a brute-force delta_g computed from the
// k-fold product distribution over {0,1,2,3}^k.

#ifndef DPCOMP_ORACLE_HPP_
#define DPCOMP_ORACLE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dpcomp/composition.hpp"
#include "dpcomp/errors.hpp"
#include "dpcomp/numerics.hpp"

namespace dpcomp {

inline constexpr std::size_t kDefaultRREnumerationLimit = 10;

using OutcomePmf = std::array<Real, 4>;

struct RRDistribution {
  Rational epsilon;
  Rational delta;
  OutcomePmf pmf0;  // input bit 0
  OutcomePmf pmf1;  // input bit 1
};

/// Row of the mechanism's output distribution for input bit b:
///   b = 0: (delta, alpha e^eps / (1 + e^eps), alpha / (1 + e^eps), 0)
///   b = 1: (0, alpha / (1 + e^eps), alpha e^eps / (1 + e^eps), delta)
/// with alpha = 1 - delta.
inline OutcomePmf rr_pmf(int b, const Rational& epsilon, const Rational& delta,
                         const PrecisionConfig& cfg = {}) {
  const PrivacyParams params(epsilon, delta);
  if (b != 0 && b != 1) throw InvalidArgument("input bit must be 0 or 1");
  const mpfr_prec_t prec = cfg.mpfr_precision();
  const Real alpha(Rational(1 - params.delta), prec);
  const Real e = exp(Real(params.epsilon, prec));
  const Real denom = add(Real(1.0, prec), e);
  Real likely = div(mul(alpha, e), denom);
  Real unlikely = div(alpha, denom);
  Real d(params.delta, prec);
  if (b == 0) return {std::move(d), std::move(likely), std::move(unlikely), Real(prec)};
  return {Real(prec), std::move(unlikely), std::move(likely), std::move(d)};
}

inline RRDistribution rr_distribution(const Rational& epsilon, const Rational& delta,
                                      const PrecisionConfig& cfg = {}) {
  return RRDistribution{epsilon, delta, rr_pmf(0, epsilon, delta, cfg), rr_pmf(1, epsilon, delta, cfg)};
}

// SplitMix64 finalizer over (seed, draw index): a counter-based stream, so
// draw i of a seed is reproducible without replaying draws 0..i-1.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t draw_index) {
  std::uint64_t z = seed + (draw_index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// One draw of the mechanism on input b; deterministic in (seed, draw_index).
inline int rr_sample(int b, const Rational& epsilon, const Rational& delta, std::uint64_t seed,
                     std::uint64_t draw_index = 0) {
  const OutcomePmf pmf = rr_pmf(b, epsilon, delta, PrecisionConfig{64, 32});
  const double u =
      static_cast<double>(counter_hash(seed, draw_index) >> 11) * 0x1.0p-53;  // [0, 1)
  double cumulative = 0;
  for (int outcome = 0; outcome < 3; ++outcome) {
    cumulative += pmf[static_cast<std::size_t>(outcome)].to_double();
    if (u < cumulative) return outcome;
  }
  return 3;
}

/// delta_g(epsilon_g) as sum over x in {0,1,2,3}^k of
/// max{P0(x) - e^{eps_g} P1(x), 0}, walking outcomes in base-4 counter
/// order and refreshing only the prefix products past the changed digit.
inline Real enumerate_delta(const CompositionInstance& instance, const Real& epsilon_g,
                            const PrecisionConfig& cfg = {},
                            std::size_t enumeration_limit = kDefaultRREnumerationLimit) {
  const std::size_t k = instance.k();
  if (k > enumeration_limit || k > 30) throw EnumerationTooLarge(k, enumeration_limit);
  if (epsilon_g.sign() < 0) throw InvalidArgument("epsilon_g must be non-negative");
  PrecisionConfig wide = cfg;
  wide.precision_bits += 16;
  const mpfr_prec_t prec = wide.mpfr_precision();

  std::vector<RRDistribution> rows;
  rows.reserve(k);
  for (const auto& p : instance.params()) rows.push_back(rr_distribution(p.epsilon, p.delta, wide));

  Real c(prec);
  mpfr_exp(c.get(), epsilon_g.get(), MPFR_RNDN);

  std::vector<int> digit(k, 0);
  std::vector<Real> p0(k + 1, Real(1.0, prec));
  std::vector<Real> p1(k + 1, Real(1.0, prec));
  auto refresh_from = [&](std::size_t j) {
    for (std::size_t i = j; i < k; ++i) {
      const auto d = static_cast<std::size_t>(digit[i]);
      mpfr_mul(p0[i + 1].get(), p0[i].get(), rows[i].pmf0[d].get(), MPFR_RNDN);
      mpfr_mul(p1[i + 1].get(), p1[i].get(), rows[i].pmf1[d].get(), MPFR_RNDN);
    }
  };
  refresh_from(0);

  Real acc(prec), cp1(prec);
  for (;;) {
    const Real& a = p0[k];
    if (!a.is_zero()) {
      if (p1[k].is_zero()) {
        mpfr_add(acc.get(), acc.get(), a.get(), MPFR_RNDN);
      } else {
        mpfr_mul(cp1.get(), c.get(), p1[k].get(), MPFR_RNDN);
        if (a > cp1) {
          mpfr_add(acc.get(), acc.get(), a.get(), MPFR_RNDN);
          mpfr_sub(acc.get(), acc.get(), cp1.get(), MPFR_RNDN);
        }
      }
    }
    // advance the base-4 counter, last digit fastest
    std::size_t j = k;
    while (j > 0 && digit[j - 1] == 3) {
      digit[j - 1] = 0;
      --j;
    }
    if (j == 0) break;
    ++digit[j - 1];
    refresh_from(j - 1);
  }
  Real out(cfg.mpfr_precision());
  mpfr_set(out.get(), acc.get(), MPFR_RNDN);
  return out;
}

}  // namespace dpcomp

#endif  // DPCOMP_ORACLE_HPP_
