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

// Weighted knapsack counting:
//
//   F(r, s) = sum over S subset of [r] with sum_{i in S} a_i <= s of prod_{i in S} w_i
//
// tabulated by F(r, s) = F(r-1, s) + w_r F(r-1, s - a_r). The scalar type is
// a template parameter: Rational gives exact sums, Real with a directed
// Rounding gives a one-sided bound (all weights are positive, so rounding
// every fused multiply-add the same way bounds the exact value).

#ifndef DPCOMP_KNAPSACK_HPP_
#define DPCOMP_KNAPSACK_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dpcomp/errors.hpp"
#include "dpcomp/numerics.hpp"

namespace dpcomp {

namespace detail {

inline void check_shapes(std::size_t levels, std::size_t weights) {
  if (levels != weights) {
    throw InvalidArgument("knapsack levels and weights must have equal length");
  }
}

}  // namespace detail

/// Final row F(k, 0..capacity). Only one row is kept; each item updates it
/// in place from high s to low s.
template <class T>
std::vector<T> knapsack_row(std::span<const std::uint64_t> a, std::uint64_t capacity,
                            std::span<const T> w, const T& one,
                            Rounding rnd = Rounding::nearest) {
  detail::check_shapes(a.size(), w.size());
  std::vector<T> row(static_cast<std::size_t>(capacity) + 1, one);
  for (std::size_t r = 0; r < a.size(); ++r) {
    const std::uint64_t ar = a[r];
    if (ar > capacity) continue;
    for (std::uint64_t s = capacity; s + 1 > ar; --s) {
      multiply_add(row[s], w[r], row[s - ar], rnd);
      if (s == 0) break;
    }
  }
  return row;
}

/// F(k, capacity).
template <class T>
T knapsack_sum(std::span<const std::uint64_t> a, std::uint64_t capacity, std::span<const T> w,
               const T& one, Rounding rnd = Rounding::nearest) {
  return knapsack_row(a, capacity, w, one, rnd).back();
}

inline Rational knapsack_sum(std::span<const std::uint64_t> a, std::uint64_t capacity,
                             std::span<const Rational> w) {
  return knapsack_sum<Rational>(a, capacity, w, Rational(1));
}

/// Two knapsack rows over the same levels with different weights and
/// roundings, sharing one pass over the capacity.
template <class T>
std::pair<std::vector<T>, std::vector<T>> knapsack_rows(std::span<const std::uint64_t> a,
                                                        std::uint64_t capacity,
                                                        std::span<const T> w1, Rounding rnd1,
                                                        std::span<const T> w2, Rounding rnd2,
                                                        const T& one) {
  detail::check_shapes(a.size(), w1.size());
  detail::check_shapes(a.size(), w2.size());
  std::vector<T> row1(static_cast<std::size_t>(capacity) + 1, one);
  std::vector<T> row2(static_cast<std::size_t>(capacity) + 1, one);
  for (std::size_t r = 0; r < a.size(); ++r) {
    const std::uint64_t ar = a[r];
    if (ar > capacity) continue;
    for (std::uint64_t s = capacity; s + 1 > ar; --s) {
      multiply_add(row1[s], w1[r], row1[s - ar], rnd1);
      multiply_add(row2[s], w2[r], row2[s - ar], rnd2);
      if (s == 0) break;
    }
  }
  return {std::move(row1), std::move(row2)};
}

/// The full (k+1) x (B+1) table, for inspection and small instances.
template <class T>
class KnapsackTable {
 public:
  KnapsackTable(std::span<const std::uint64_t> a, std::uint64_t capacity, std::span<const T> w,
                const T& one, Rounding rnd = Rounding::nearest)
      : rows_(a.size() + 1), cols_(static_cast<std::size_t>(capacity) + 1) {
    detail::check_shapes(a.size(), w.size());
    cells_.assign(rows_ * cols_, one);
    for (std::size_t r = 1; r < rows_; ++r) {
      const std::uint64_t ar = a[r - 1];
      for (std::size_t s = 0; s < cols_; ++s) {
        T& cell = cells_[r * cols_ + s];
        cell = cells_[(r - 1) * cols_ + s];
        if (ar <= s) multiply_add(cell, w[r - 1], cells_[(r - 1) * cols_ + (s - ar)], rnd);
      }
    }
  }

  const T& at(std::size_t r, std::size_t s) const { return cells_.at(r * cols_ + s); }
  std::size_t items() const { return rows_ - 1; }
  std::uint64_t capacity() const { return cols_ - 1; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> cells_;
};

}  // namespace dpcomp

#endif  // DPCOMP_KNAPSACK_HPP_
