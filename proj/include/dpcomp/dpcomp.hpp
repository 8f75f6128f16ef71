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

// Everything except the HTTP service, which pulls in cpp-httplib.

#ifndef DPCOMP_DPCOMP_HPP_
#define DPCOMP_DPCOMP_HPP_

#include "dpcomp/accountant.hpp"
#include "dpcomp/approx.hpp"
#include "dpcomp/composition.hpp"
#include "dpcomp/errors.hpp"
#include "dpcomp/knapsack.hpp"
#include "dpcomp/numerics.hpp"
#include "dpcomp/oracle.hpp"

#endif  // DPCOMP_DPCOMP_HPP_
