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

#include "dpcomp/oracle.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

namespace dpcomp {
namespace {

constexpr mpfr_prec_t kPrec = 128;
const Rational kLn2 = parse_rational("0.69314718055994530941723212145817656807");
const Rational kLn3 = parse_rational("1.09861228866810969139524523692252570464");

Rational random_rational(std::mt19937_64& rng, double lo, double hi, long den = 1000) {
  std::uniform_int_distribution<long> u(static_cast<long>(lo * den), static_cast<long>(hi * den));
  Rational q(u(rng), den);
  q.canonicalize();
  return q;
}

TEST(RRPmfTest, Examples) {
  auto p = rr_pmf(0, 0, 0);
  EXPECT_TRUE(p[0].is_zero());
  EXPECT_EQ(p[1], Rational(1, 2));
  EXPECT_EQ(p[2], Rational(1, 2));
  EXPECT_TRUE(p[3].is_zero());

  p = rr_pmf(0, kLn2, 0);
  EXPECT_NEAR(p[1].to_double(), 2.0 / 3.0, 1e-16);
  EXPECT_NEAR(p[2].to_double(), 1.0 / 3.0, 1e-16);

  const Rational eps(7, 10);
  p = rr_pmf(1, eps, Rational(1, 10));
  const double e = std::exp(0.7);
  EXPECT_TRUE(p[0].is_zero());
  EXPECT_NEAR(p[1].to_double(), 0.9 / (1 + e), 1e-15);
  EXPECT_NEAR(p[2].to_double(), 0.9 * e / (1 + e), 1e-15);
  EXPECT_EQ(p[3], Real(Rational(1, 10), kPrec));
}

TEST(RRPmfTest, Validates) {
  EXPECT_THROW(rr_pmf(2, 0, 0), InvalidArgument);
  EXPECT_THROW(rr_pmf(0, -1, 0), InvalidArgument);
  EXPECT_THROW(rr_pmf(0, 1, 1), InvalidArgument);
}

TEST(RRPmfTest, RowsSumToOneAndMirror) {
  std::mt19937_64 rng(79);
  const double tol = std::ldexp(1.0, 1 - static_cast<int>(kPrec));
  for (int trial = 0; trial < 100; ++trial) {
    const Rational eps = random_rational(rng, 0, 5);
    const Rational delta = random_rational(rng, 0, 0.99);
    const RRDistribution d = rr_distribution(eps, delta);
    Real s0(kPrec), s1(kPrec);
    for (int i = 0; i < 4; ++i) {
      s0 += d.pmf0[i];
      s1 += d.pmf1[i];
      EXPECT_EQ(d.pmf0[i], d.pmf1[3 - i]);
    }
    EXPECT_LE(std::fabs(sub(s0, Real(1.0, kPrec)).to_double()), tol);
    EXPECT_LE(std::fabs(sub(s1, Real(1.0, kPrec)).to_double()), tol);
  }
}

TEST(RRPmfTest, SingleMechanismIsExactlyEpsDelta) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const Rational eps = random_rational(rng, 0, 3);
    const Rational delta = random_rational(rng, 0, 0.5);
    const RRDistribution d = rr_distribution(eps, delta, PrecisionConfig{256, 53});
    const Real c = exp(Real(eps, 256));
    Real best = Real::neg_infinity(256);
    Real best_rev = Real::neg_infinity(256);
    unsigned best_set = 0;
    for (unsigned set = 0; set < 16; ++set) {
      Real p0(256), p1(256);
      for (unsigned x = 0; x < 4; ++x) {
        if (set >> x & 1) {
          p0 += d.pmf0[x];
          p1 += d.pmf1[x];
        }
      }
      const Real gap = sub(p0, mul(c, p1));
      if (gap > best) {
        best = gap;
        best_set = set;
      }
      const Real rev = sub(p1, mul(c, p0));
      if (rev > best_rev) best_rev = rev;
    }
    EXPECT_LE(std::fabs(sub(best, Real(delta, 256)).to_double()), 1e-60);
    EXPECT_LE(std::fabs(sub(best_rev, Real(delta, 256)).to_double()), 1e-60);
    if (delta > 0) {
      EXPECT_EQ(best_set & 1u, 1u);
    }
  }
}

TEST(RRSampleTest, DeterministicPerSeedAndIndex) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_EQ(rr_sample(0, kLn2, Rational(1, 10), 1234, i), rr_sample(0, kLn2, Rational(1, 10), 1234, i));
  }
  int differ = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    differ += rr_sample(0, 0, 0, 1, i) != rr_sample(0, 0, 0, 2, i);
  }
  EXPECT_GT(differ, 0);
}

TEST(RRSampleTest, DegenerateMass) {
  const Rational delta = 1 - Rational(1, 1'000'000'000);
  int zeros = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) zeros += rr_sample(0, 1, delta, 5, i) == 0;
  EXPECT_GE(zeros, 9999);
}

void expect_within_three_sigma(int b, const Rational& eps, const Rational& delta, std::uint64_t seed) {
  constexpr int kDraws = 100000;
  std::array<int, 4> counts{};
  for (std::uint64_t i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(rr_sample(b, eps, delta, seed, i))];
  const OutcomePmf pmf = rr_pmf(b, eps, delta);
  for (std::size_t x = 0; x < 4; ++x) {
    const double p = pmf[x].to_double();
    const double sigma = std::sqrt(kDraws * p * (1 - p));
    EXPECT_LE(std::fabs(counts[x] - kDraws * p), 3 * sigma + 1e-9)
        << "outcome " << x << " eps=" << eps.get_d() << " delta=" << delta.get_d();
  }
}

TEST(RRSampleTest, FrequenciesMatchPmf) {
  expect_within_three_sigma(0, 0, 0, 101);
  expect_within_three_sigma(0, kLn2, 0, 102);
  expect_within_three_sigma(1, Rational(13, 10), Rational(1, 20), 103);
}

TEST(EnumerateDeltaTest, Examples) {
  const Rational eps(4, 5), delta(3, 100);
  const CompositionInstance single({{eps, delta}});
  EXPECT_NEAR(enumerate_delta(single, Real(eps, kPrec)).to_double(), 0.03, 1e-30);

  const CompositionInstance two({{kLn2, 0}, {kLn3, 0}});
  EXPECT_NEAR(enumerate_delta(two, Real(kLn3, kPrec)).to_double(), 0.25, 1e-15);

  const CompositionInstance pure({{Rational(1, 2), 0}, {Rational(3, 4), 0}, {Rational(1, 3), 0}});
  EXPECT_TRUE(enumerate_delta(pure, Real(pure.eps_sum(), kPrec, Rounding::toward_plus_infinity)).is_zero());
}

TEST(EnumerateDeltaTest, FrozenMixedInstance) {
  // mpmath over all 64 outcomes: 0.40877257578069965474...
  const CompositionInstance inst(
      {{Rational(3, 10), Rational(1, 100)}, {Rational(7, 10), 0}, {Rational(11, 10), Rational(2, 100)}});
  EXPECT_NEAR(enumerate_delta(inst, Real(Rational(1, 2), kPrec)).to_double(), 0.40877257578069965, 1e-16);
}

TEST(EnumerateDeltaTest, LimitAndValidation) {
  const auto inst = CompositionInstance::homogeneous({Rational(1, 10), 0}, 11);
  EXPECT_THROW(enumerate_delta(inst, Real(0.1, kPrec)), EnumerationTooLarge);
  const auto small = CompositionInstance::homogeneous({Rational(1, 10), 0}, 2);
  EXPECT_THROW(enumerate_delta(small, Real(-0.1, kPrec)), InvalidArgument);
}

TEST(EnumerateDeltaTest, AgreesWithSubsetFormula) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(trial % 6);
    std::vector<PrivacyParams> v;
    for (std::size_t i = 0; i < k; ++i) v.emplace_back(random_rational(rng, 0, 2), random_rational(rng, 0, 0.2));
    const CompositionInstance inst(std::move(v));
    const Real eg(random_rational(rng, 0, inst.eps_sum().get_d()), kPrec);
    const double a = enumerate_delta(inst, eg).to_double();
    const double b = exact_delta_of_epsilon(inst, eg).to_double();
    EXPECT_LE(std::fabs(a - b), 1e-9 * std::max(b, 1e-12)) << "trial " << trial;
  }
}

}  // namespace
}  // namespace dpcomp
