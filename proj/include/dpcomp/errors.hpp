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

#ifndef DPCOMP_ERRORS_HPP_
#define DPCOMP_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpcomp {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// delta_g lies below 1 - prod(1 - delta_i); no finite epsilon_g exists.
class InfeasibleDelta : public Error {
 public:
  InfeasibleDelta(double threshold, const std::string& what)
      : Error(what), threshold_(threshold) {}

  // Smallest admissible delta_g for the instance.
  double threshold() const noexcept { return threshold_; }

 private:
  double threshold_;
};

// The request is well formed but exceeds a configured size limit.
class LimitExceeded : public Error {
 public:
  using Error::Error;
};

class EnumerationTooLarge : public LimitExceeded {
 public:
  EnumerationTooLarge(std::size_t k, std::size_t limit)
      : LimitExceeded("k = " + std::to_string(k) + " exceeds the enumeration limit " +
              std::to_string(limit)),
        k_(k),
        limit_(limit) {}

  std::size_t k() const noexcept { return k_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t k_;
  std::size_t limit_;
};

// A zero global epsilon leaves nothing to distribute.
class ZeroBudget : public Error {
 public:
  using Error::Error;
};

}  // namespace dpcomp

#endif  // DPCOMP_ERRORS_HPP_
