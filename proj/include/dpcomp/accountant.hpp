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

// Request handling shared by the command-line tool and the HTTP service:
// request parsing, method dispatch, budget allocation, curve export, and the
// mapping from library errors to status codes.

#ifndef DPCOMP_ACCOUNTANT_HPP_
#define DPCOMP_ACCOUNTANT_HPP_

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "dpcomp/approx.hpp"
#include "dpcomp/composition.hpp"
#include "dpcomp/errors.hpp"
#include "dpcomp/numerics.hpp"
#include "dpcomp/oracle.hpp"
#include "json.hpp"

namespace dpcomp {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::size_t kDefaultMaxKApprox = 10000;

using Json = nlohmann::ordered_json;

/// Eta used when `auto` resolves to the approximation and none was given.
inline Rational default_auto_eta() { return Rational(1, 20); }

struct AccountantConfig {
  PrecisionConfig precision;
  std::size_t enum_limit = kDefaultEnumerationLimit;
  std::size_t rr_enum_limit = kDefaultRREnumerationLimit;
  std::size_t max_k_approx = kDefaultMaxKApprox;
  // Concurrent approximation jobs; 0 means one per hardware thread.
  unsigned approx_workers = 0;
  ApproxOptions approx;
};

namespace detail {

inline std::optional<std::size_t> env_size(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (end == v || *end != '\0') {
    throw InvalidArgument(std::string(name) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(x);
}

}  // namespace detail

/// Applies DPCOMP_ENUM_LIMIT, DPCOMP_MAX_K_APPROX and DPCOMP_APPROX_WORKERS.
inline AccountantConfig apply_environment(AccountantConfig cfg) {
  if (auto v = detail::env_size("DPCOMP_ENUM_LIMIT")) cfg.enum_limit = *v;
  if (auto v = detail::env_size("DPCOMP_MAX_K_APPROX")) cfg.max_k_approx = *v;
  if (auto v = detail::env_size("DPCOMP_APPROX_WORKERS")) cfg.approx_workers = static_cast<unsigned>(*v);
  return cfg;
}

// ---------------------------------------------------------------------------
// Requests

namespace detail {

inline Rational json_rational(const Json& v, std::string_view field) {
  std::string text;
  if (v.is_string()) {
    text = v.get<std::string>();
  } else if (v.is_number()) {
    text = v.dump();
  } else {
    throw InvalidArgument(std::string(field) + " must be a decimal string");
  }
  try {
    return parse_rational(text);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(field) + ": " + e.what());
  }
}

inline std::optional<Rational> json_optional_rational(const Json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return json_rational(*it, field);
}

inline const Json& json_required(const Json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    throw InvalidArgument(std::string("missing field '") + field + "'");
  }
  return *it;
}

}  // namespace detail

/// A method name or "auto" (returned as nullopt).
inline std::optional<Method> parse_method_choice(std::string_view name) {
  if (name == "auto") return std::nullopt;
  if (auto m = parse_method(name)) return m;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

inline std::string method_choice_name(const std::optional<Method>& m) {
  return m ? std::string(method_name(*m)) : std::string("auto");
}

/// Splits "a,b,c" into its fields, trimming none.
inline std::vector<std::string> split_list(std::string_view text, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parameters from parallel epsilon and delta lists; a single delta applies to all.
inline std::vector<PrivacyParams> params_from_lists(const std::vector<Rational>& eps,
                                                    const std::vector<Rational>& deltas) {
  if (eps.empty()) throw InvalidArgument("at least one epsilon is required");
  if (deltas.size() != 1 && deltas.size() != eps.size()) {
    throw InvalidArgument("delta list must have one entry or one per epsilon");
  }
  std::vector<PrivacyParams> out;
  out.reserve(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    out.emplace_back(eps[i], deltas.size() == 1 ? deltas[0] : deltas[i]);
  }
  return out;
}

inline std::vector<Rational> parse_rational_list(std::string_view text, std::string_view field) {
  std::vector<Rational> out;
  for (const std::string& item : split_list(text)) {
    try {
      out.push_back(parse_rational(item));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string(field) + ": " + e.what());
    }
  }
  return out;
}

struct ComposeRequest {
  std::vector<PrivacyParams> params;
  // Exactly one is set: the given side of the (epsilon_g, delta_g) pair.
  std::optional<Rational> delta_g;
  std::optional<Rational> epsilon_g;
  std::optional<Method> method;  // nullopt: auto
  std::optional<Rational> eta;
  std::optional<Rational> delta_prime;
  // Cross-check delta_g against the four-outcome enumeration.
  bool verify = false;

  void validate() const {
    if (params.empty()) throw InvalidArgument("params must not be empty");
    if (delta_g.has_value() == epsilon_g.has_value()) {
      throw InvalidArgument("exactly one of delta_g and epsilon_g is required");
    }
    if (delta_g && *delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
    if (epsilon_g && *epsilon_g < 0) throw InvalidArgument("epsilon_g must be non-negative");
  }

  /// {"params": [{"epsilon": "0.1", "delta": "0"}, ...],
  ///  "target": {"delta_g": "1e-9"}, "method": "auto", "eta": "0.05"}
  /// The target fields may also appear at the top level.
  static ComposeRequest from_json(const Json& j) {
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    ComposeRequest r;
    const Json& params = detail::json_required(j, "params");
    if (!params.is_array()) throw InvalidArgument("params must be an array");
    for (const Json& p : params) {
      if (!p.is_object()) throw InvalidArgument("each params entry must be an object");
      r.params.emplace_back(detail::json_rational(detail::json_required(p, "epsilon"), "epsilon"),
                            detail::json_rational(detail::json_required(p, "delta"), "delta"));
    }
    const Json* target = &j;
    if (auto it = j.find("target"); it != j.end()) {
      if (!it->is_object()) throw InvalidArgument("target must be an object");
      target = &*it;
    }
    r.delta_g = detail::json_optional_rational(*target, "delta_g");
    r.epsilon_g = detail::json_optional_rational(*target, "epsilon_g");
    if (auto it = j.find("method"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw InvalidArgument("method must be a string");
      r.method = parse_method_choice(it->get<std::string>());
    }
    r.eta = detail::json_optional_rational(j, "eta");
    r.delta_prime = detail::json_optional_rational(j, "delta_prime");
    if (auto it = j.find("verify"); it != j.end() && !it->is_null()) {
      if (!it->is_boolean()) throw InvalidArgument("verify must be a boolean");
      r.verify = it->get<bool>();
    }
    r.validate();
    return r;
  }
};

struct StatisticSpec {
  std::string name;
  Rational weight;
  Rational delta;
};

struct AllocationRequest {
  std::vector<StatisticSpec> statistics;
  Rational epsilon_g;
  Rational delta_g;
  std::optional<Method> method;
  std::optional<Rational> eta;

  void validate() const {
    if (statistics.empty()) throw InvalidArgument("statistics must not be empty");
    for (const auto& s : statistics) {
      if (s.weight <= 0) throw InvalidArgument("weight of '" + s.name + "' must be positive");
      if (s.delta < 0 || s.delta >= 1) throw InvalidArgument("delta of '" + s.name + "' must lie in [0, 1)");
    }
    if (epsilon_g < 0) throw InvalidArgument("epsilon_g must be non-negative");
    if (delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
  }

  /// {"statistics": [{"name": "a", "weight": "1", "delta": "0"}],
  ///  "global": {"epsilon_g": "1", "delta_g": "1e-6"}, "method": "auto"}
  static AllocationRequest from_json(const Json& j) {
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    AllocationRequest r;
    const Json& stats = detail::json_required(j, "statistics");
    if (!stats.is_array()) throw InvalidArgument("statistics must be an array");
    std::size_t index = 0;
    for (const Json& s : stats) {
      if (!s.is_object()) throw InvalidArgument("each statistics entry must be an object");
      StatisticSpec spec;
      if (auto it = s.find("name"); it != s.end() && it->is_string()) {
        spec.name = it->get<std::string>();
      } else {
        spec.name = "statistic_" + std::to_string(index);
      }
      spec.weight = detail::json_rational(detail::json_required(s, "weight"), "weight");
      spec.delta = s.contains("delta") ? detail::json_rational(s["delta"], "delta") : Rational(0);
      r.statistics.push_back(std::move(spec));
      ++index;
    }
    const Json& global = detail::json_required(j, "global");
    if (!global.is_object()) throw InvalidArgument("global must be an object");
    r.epsilon_g = detail::json_rational(detail::json_required(global, "epsilon_g"), "epsilon_g");
    r.delta_g = detail::json_rational(detail::json_required(global, "delta_g"), "delta_g");
    if (auto it = j.find("method"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw InvalidArgument("method must be a string");
      r.method = parse_method_choice(it->get<std::string>());
    }
    r.eta = detail::json_optional_rational(j, "eta");
    r.validate();
    return r;
  }
};

struct KRange {
  std::size_t start = 1;
  std::size_t stop = 1;
  std::size_t step = 1;

  /// "start:stop:step" (stop inclusive), "start:stop" or a single "k".
  static KRange parse(std::string_view text) {
    const auto parts = split_list(text, ':');
    if (parts.size() > 3) throw InvalidArgument("k range must look like start:stop:step");
    std::vector<std::size_t> v;
    for (const auto& p : parts) {
      char* end = nullptr;
      const unsigned long long x = std::strtoull(p.c_str(), &end, 10);
      if (p.empty() || *end != '\0' || p[0] == '-') throw InvalidArgument("bad k range '" + std::string(text) + "'");
      v.push_back(static_cast<std::size_t>(x));
    }
    KRange r{v[0], v.size() > 1 ? v[1] : v[0], v.size() > 2 ? v[2] : 1};
    if (r.start == 0 || r.step == 0 || r.stop < r.start) {
      throw InvalidArgument("k range needs 1 <= start <= stop and step >= 1");
    }
    return r;
  }
};

struct CurveRequest {
  Rational epsilon;
  Rational delta;
  Rational delta_g;
  KRange k_range;
  std::vector<std::optional<Method>> methods;
  std::optional<Rational> eta;
  std::optional<Rational> delta_prime;

  /// Keys as in the CLI flags; '-' and '_' are interchangeable.
  static CurveRequest from_fields(const std::map<std::string, std::string>& fields) {
    auto get = [&](std::string key) -> std::optional<std::string> {
      if (auto it = fields.find(key); it != fields.end()) return it->second;
      std::replace(key.begin(), key.end(), '_', '-');
      if (auto it = fields.find(key); it != fields.end()) return it->second;
      return std::nullopt;
    };
    auto need = [&](const char* key) {
      auto v = get(key);
      if (!v) throw InvalidArgument(std::string("missing parameter '") + key + "'");
      return *v;
    };
    auto rational = [](const std::string& text, const char* field) {
      try {
        return parse_rational(text);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string(field) + ": " + e.what());
      }
    };
    CurveRequest r;
    r.epsilon = rational(need("eps"), "eps");
    r.delta = rational(get("delta").value_or("0"), "delta");
    r.delta_g = rational(need("delta_g"), "delta_g");
    r.k_range = KRange::parse(need("k_range"));
    for (const auto& m : split_list(get("methods").value_or("basic,advanced,homogeneous-optimal"))) {
      r.methods.push_back(parse_method_choice(m));
    }
    if (auto v = get("eta")) r.eta = rational(*v, "eta");
    if (auto v = get("delta_prime")) r.delta_prime = rational(*v, "delta_prime");
    r.validate();
    return r;
  }

  void validate() const {
    (void)PrivacyParams(epsilon, delta);
    if (delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
    if (methods.empty()) throw InvalidArgument("methods must not be empty");
  }
};

// ---------------------------------------------------------------------------
// Outcomes

struct ApproxDetails {
  Rational eta;
  std::uint64_t a_star = 0;
  std::uint64_t a_total = 0;
  Rational beta;
  Real epsilon0;
  Real shrunk_delta_g;
};

struct ComposeOutcome {
  GuaranteeResult result;
  std::string requested_method;
  // Which side of the pair was computed: "epsilon_g" or "delta_g".
  std::string solved_for;
  std::size_t k = 0;
  std::optional<ApproxDetails> approx;
  std::optional<Real> oracle_delta_g;
  double runtime_ms = 0;
};

struct AllocatedStatistic {
  std::string name;
  Rational weight;
  Rational epsilon;
  Rational delta;
};

struct AllocationOutcome {
  std::vector<AllocatedStatistic> allocations;
  Rational scale;
  Method method = Method::basic;
  std::string requested_method;
  Rational requested_epsilon_g;
  Rational delta_g;
  Real realized_epsilon_g;
  // The search stopped on the requested budget itself rather than below it.
  bool realized_at_budget = false;
  PrecisionConfig precision;
  double runtime_ms = 0;
};

struct CurveRow {
  std::size_t k = 0;
  Method method = Method::basic;
  Real epsilon_g;
  bool vacuous = false;
};

// Doubles on the wire are rounded outward: upper bounds up, lower bounds down.
inline double upper_double(const Real& x) { return x.to_double(Rounding::toward_plus_infinity); }
inline double lower_double(const Real& x) { return x.to_double(Rounding::toward_minus_infinity); }

// Plain values such as eta or the request echo: nearest double.
inline double rational_double(const Rational& q) { return Real(q, 53).to_double(); }

inline Json precision_json(const PrecisionConfig& p) {
  return Json{{"precision_bits", p.precision_bits},
              {"target_bits", p.target_bits},
              {"rounding", std::string(rounding_name(p.rounding_mode))}};
}

inline Json to_json(const ComposeOutcome& o, bool include_runtime = true) {
  const GuaranteeResult& r = o.result;
  Json j;
  j["epsilon_g"] = upper_double(r.epsilon_g);
  j["delta_g"] = upper_double(r.delta_g);
  j["method"] = std::string(method_name(r.method));
  j["requested_method"] = o.requested_method;
  j["solved_for"] = o.solved_for;
  j["k"] = o.k;
  if (r.bracket) {
    j["bracket"] = Json{{"lower", lower_double(r.bracket->lower)}, {"upper", upper_double(r.bracket->upper)}};
  } else {
    j["bracket"] = nullptr;
  }
  j["vacuous"] = r.vacuous;
  j["heterogeneous_extension"] = r.heterogeneous_extension;
  j["precision"] = precision_json(r.precision);
  if (o.approx) {
    const ApproxDetails& a = *o.approx;
    j["approx"] = Json{{"eta", rational_double(a.eta)},
                       {"a_star", a.a_star},
                       {"a_total", a.a_total},
                       {"beta", rational_double(a.beta)},
                       {"epsilon0", upper_double(a.epsilon0)},
                       {"shrunk_delta_g", lower_double(a.shrunk_delta_g)}};
  }
  if (o.oracle_delta_g) j["oracle_delta_g"] = o.oracle_delta_g->to_double();
  if (include_runtime) j["runtime_ms"] = o.runtime_ms;
  return j;
}

inline Json to_json(const AllocationOutcome& o, bool include_runtime = true) {
  Json j;
  Json list = Json::array();
  for (const auto& a : o.allocations) {
    // epsilons are rounded down so that the printed budget is still covered
    list.push_back(Json{{"name", a.name},
                        {"weight", rational_double(a.weight)},
                        {"epsilon", lower_double(Real(a.epsilon, 128, Rounding::toward_minus_infinity))},
                        {"delta", rational_double(a.delta)}});
  }
  j["allocations"] = std::move(list);
  j["scale"] = lower_double(Real(o.scale, 128, Rounding::toward_minus_infinity));
  j["method"] = std::string(method_name(o.method));
  j["requested_method"] = o.requested_method;
  j["requested"] = Json{{"epsilon_g", rational_double(o.requested_epsilon_g)},
                        {"delta_g", rational_double(o.delta_g)}};
  const double requested = rational_double(o.requested_epsilon_g);
  const double realized = o.realized_at_budget ? requested : std::min(upper_double(o.realized_epsilon_g), requested);
  j["realized"] = Json{{"epsilon_g", realized},
                       {"delta_g", rational_double(o.delta_g)}};
  j["precision"] = precision_json(o.precision);
  if (include_runtime) j["runtime_ms"] = o.runtime_ms;
  return j;
}

inline Json to_json(const std::vector<CurveRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back(Json{{"k", r.k},
                       {"method", std::string(method_name(r.method))},
                       {"epsilon_g", upper_double(r.epsilon_g)},
                       {"vacuous", r.vacuous}});
  }
  return out;
}

/// CSV with header `k,method,epsilon_g`, 12 significant digits, LF endings.
inline std::string to_csv(const std::vector<CurveRow>& rows) {
  std::string out = "k,method,epsilon_g\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.12g", upper_double(r.epsilon_g));
    out += std::to_string(r.k);
    out += ',';
    out += method_name(r.method);
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error mapping

struct ErrorReport {
  int http_status = 500;
  int exit_code = 1;
  Json body;
};

/// Classifies the in-flight exception. Call from inside a catch block.
inline ErrorReport describe_current_exception() {
  ErrorReport r;
  try {
    throw;
  } catch (const InfeasibleDelta& e) {
    r = {422, 2, Json{{"reason", "infeasible_delta"}, {"message", e.what()}, {"threshold", e.threshold()}}};
  } catch (const ZeroBudget& e) {
    r = {422, 2, Json{{"reason", "zero_budget"}, {"message", e.what()}}};
  } catch (const EnumerationTooLarge& e) {
    r = {413, 1,
         Json{{"reason", "limit_exceeded"}, {"message", e.what()}, {"k", e.k()}, {"limit", e.limit()}}};
  } catch (const LimitExceeded& e) {
    r = {413, 1, Json{{"reason", "limit_exceeded"}, {"message", e.what()}}};
  } catch (const InvalidArgument& e) {
    r = {400, 1, Json{{"reason", "invalid_request"}, {"message", e.what()}}};
  } catch (const nlohmann::json::exception& e) {
    r = {400, 1, Json{{"reason", "invalid_request"}, {"message", e.what()}}};
  } catch (const std::exception& e) {
    r = {500, 1, Json{{"reason", "internal_error"}, {"message", e.what()}}};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch

class Accountant {
 public:
  explicit Accountant(AccountantConfig cfg = {})
      : cfg_(std::move(cfg)), slots_(static_cast<std::ptrdiff_t>(worker_count(cfg_.approx_workers))) {
    cfg_.precision.validate();
  }

  Accountant(const Accountant&) = delete;
  Accountant& operator=(const Accountant&) = delete;

  const AccountantConfig& config() const { return cfg_; }

  /// Exact when k fits the enumeration limit, otherwise the approximation.
  Method resolve(const std::optional<Method>& requested, std::size_t k) const {
    if (requested) return *requested;
    return k <= cfg_.enum_limit ? Method::exact_optimal : Method::approx_optimal;
  }

  ComposeOutcome compose(const ComposeRequest& req) const {
    const auto start = std::chrono::steady_clock::now();
    req.validate();
    const CompositionInstance instance(req.params);
    const Method method = resolve(req.method, instance.k());
    check_limits(method, instance.k());
    std::optional<Rational> eta = req.eta;
    if (!eta && !req.method && method == Method::approx_optimal) eta = default_auto_eta();

    ComposeOutcome out;
    out.requested_method = method_choice_name(req.method);
    out.k = instance.k();
    if (req.delta_g) {
      out.solved_for = "epsilon_g";
      out.result = epsilon_for(method, instance, *req.delta_g, eta, req.delta_prime, &out.approx);
    } else {
      out.solved_for = "delta_g";
      out.result = delta_for(method, instance, *req.epsilon_g, eta);
    }
    if (req.verify) {
      if (instance.k() > cfg_.rr_enum_limit) throw EnumerationTooLarge(instance.k(), cfg_.rr_enum_limit);
      out.oracle_delta_g = enumerate_delta(instance, out.result.epsilon_g, cfg_.precision, cfg_.rr_enum_limit);
    }
    out.runtime_ms = elapsed_ms(start);
    return out;
  }

  /// Largest scale s with eps_j = s * weight_j such that the instance is
  /// (epsilon_g, delta_g)-DP under the method; bisection on s.
  AllocationOutcome allocate(const AllocationRequest& req) const {
    const auto start = std::chrono::steady_clock::now();
    req.validate();
    const std::size_t k = req.statistics.size();
    const Method method = resolve(req.method, k);
    check_limits(method, k);
    std::optional<Rational> eta = req.eta;
    if (!eta && !req.method && method == Method::approx_optimal) eta = default_auto_eta();

    Rational weight_sum = 0;
    std::vector<Rational> deltas;
    for (const auto& s : req.statistics) {
      weight_sum += s.weight;
      deltas.push_back(s.delta);
    }
    auto instance_at = [&](const Rational& scale) {
      std::vector<PrivacyParams> p;
      p.reserve(k);
      for (const auto& s : req.statistics) {
        Rational e = scale * s.weight;
        e.canonicalize();
        p.emplace_back(std::move(e), s.delta);
      }
      return CompositionInstance(std::move(p));
    };
    const CompositionInstance unit = instance_at(1);
    if (req.delta_g >= 1) throw InvalidArgument("delta_g must be below 1 for an allocation");
    detail::require_feasible(req.delta_g, unit.feasibility_threshold());
    if (req.epsilon_g == 0) throw ZeroBudget("epsilon_g = 0 leaves every statistic with epsilon 0");
    if ((method == Method::advanced || method == Method::homogeneous_optimal) && !unit.is_homogeneous()) {
      throw InvalidArgument(std::string(method_name(method)) +
                            " allocation needs equal weights and equal deltas");
    }

    // rounded down: delta is non-increasing in epsilon_g, so this errs on the safe side
    const Real eps_g(req.epsilon_g, cfg_.precision.mpfr_precision(), Rounding::toward_minus_infinity);
    auto feasible = [&](const Rational& scale) {
      const CompositionInstance inst = instance_at(scale);
      if (method == Method::exact_optimal) {
        const SubsetSumProfile profile(inst, cfg_.precision, cfg_.enum_limit);
        return profile.delta(eps_g) <= req.delta_g;
      }
      const GuaranteeResult r = delta_for(method, inst, req.epsilon_g, eta);
      return !r.vacuous && r.delta_g <= req.delta_g;
    };

    Rational lo = 0;
    Rational basic_scale = req.epsilon_g / weight_sum;
    basic_scale.canonicalize();
    if (!feasible(lo)) {
      throw InfeasibleDelta(unit.feasibility_threshold().get_d(),
                            "no positive budget satisfies delta_g under " + std::string(method_name(method)));
    }
    Rational hi = basic_scale;
    int doublings = 0;
    while (feasible(hi)) {
      lo = hi;
      hi *= 2;
      if (++doublings > 64) break;
    }
    if (doublings <= 64) {
      // stop once the interval is below 2^-target_bits relative to the basic scale
      Rational tol = basic_scale;
      mpq_div_2exp(tol.get_mpq_t(), tol.get_mpq_t(), cfg_.precision.target_bits);
      while (hi - lo > tol) {
        Rational mid = (lo + hi) / 2;
        mid.canonicalize();
        if (feasible(mid)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
    }
    if (lo == 0) {
      throw InfeasibleDelta(unit.feasibility_threshold().get_d(),
                            "no positive budget satisfies delta_g under " + std::string(method_name(method)));
    }

    AllocationOutcome out;
    out.scale = lo;
    out.method = method;
    out.requested_method = method_choice_name(req.method);
    out.requested_epsilon_g = req.epsilon_g;
    out.delta_g = req.delta_g;
    out.precision = cfg_.precision;
    const CompositionInstance final_instance = instance_at(lo);
    for (std::size_t i = 0; i < k; ++i) {
      out.allocations.push_back({req.statistics[i].name, req.statistics[i].weight, final_instance[i].epsilon,
                                 req.statistics[i].delta});
    }
    // (epsilon_g, delta_g) is already certified, so the realized value never exceeds it.
    GuaranteeResult realized = epsilon_for(method, final_instance, req.delta_g, eta, std::nullopt, nullptr);
    if (realized.epsilon_g < req.epsilon_g) {
      out.realized_epsilon_g = std::move(realized.epsilon_g);
    } else {
      out.realized_epsilon_g = Real(req.epsilon_g, cfg_.precision.mpfr_precision(), Rounding::toward_minus_infinity);
      out.realized_at_budget = true;
    }
    out.runtime_ms = elapsed_ms(start);
    return out;
  }

  std::vector<CurveRow> curve(const CurveRequest& req) const {
    req.validate();
    std::vector<CurveRow> rows;
    for (std::size_t k = req.k_range.start; k <= req.k_range.stop; k += req.k_range.step) {
      const CompositionInstance instance = CompositionInstance::homogeneous({req.epsilon, req.delta}, k);
      for (const auto& choice : req.methods) {
        const Method method = resolve(choice, k);
        check_limits(method, k);
        std::optional<Rational> eta = req.eta;
        if (!eta && !choice && method == Method::approx_optimal) eta = default_auto_eta();
        GuaranteeResult r = epsilon_for(method, instance, req.delta_g, eta, req.delta_prime, nullptr);
        rows.push_back(CurveRow{k, method, std::move(r.epsilon_g), r.vacuous});
      }
      if (req.k_range.stop - k < req.k_range.step) break;
    }
    return rows;
  }

  /// Least epsilon_g certified at delta_g by the method.
  GuaranteeResult epsilon_for(Method method, const CompositionInstance& instance, const Rational& delta_g,
                              const std::optional<Rational>& eta, const std::optional<Rational>& delta_prime,
                              std::optional<ApproxDetails>* details) const {
    const PrecisionConfig& cfg = cfg_.precision;
    if (delta_g < 0) throw InvalidArgument("delta_g must be non-negative");
    if (delta_g >= 1) return detail::vacuous_result(method, delta_g, cfg);
    detail::require_feasible(delta_g, instance.feasibility_threshold());
    switch (method) {
      case Method::basic: {
        GuaranteeResult r = basic_compose(instance, cfg);
        Rational delta_sum = 0;
        for (const auto& p : instance.params()) delta_sum += p.delta;
        if (delta_sum > delta_g) {
          throw InfeasibleDelta(delta_sum.get_d(), "basic composition needs delta_g >= sum of delta_i = " +
                                                       to_decimal_string(delta_sum));
        }
        return r;
      }
      case Method::advanced: {
        const PrivacyParams& p = require_homogeneous(instance, method);
        const Rational k_delta = static_cast<unsigned long>(instance.k()) * p.delta;
        Rational slack = delta_prime ? *delta_prime : Rational(delta_g - k_delta);
        if (!delta_prime && slack <= 0) {
          throw InfeasibleDelta(k_delta.get_d(), "advanced composition needs delta_g > k delta = " +
                                                     to_decimal_string(k_delta));
        }
        if (delta_prime && k_delta + slack > delta_g) {
          throw InvalidArgument("k delta + delta_prime exceeds delta_g");
        }
        return advanced_compose(p.epsilon, p.delta, instance.k(), slack, cfg);
      }
      case Method::homogeneous_optimal: {
        const PrivacyParams& p = require_homogeneous(instance, method);
        return homogeneous_optimal_epsilon(p.epsilon, p.delta, instance.k(), delta_g, cfg);
      }
      case Method::exact_optimal:
        return exact_optimal_epsilon(instance, delta_g, cfg, cfg_.enum_limit);
      case Method::approx_optimal: {
        if (!eta) throw InvalidArgument("approx-optimal requires eta");
        const SlotGuard guard(slots_);
        ApproxResult a = approx_optimal_epsilon(instance, delta_g, *eta, cfg, cfg_.approx);
        const mpfr_prec_t prec = cfg.mpfr_precision();
        Real lower = sub(a.epsilon_star, Real(*eta, prec, Rounding::toward_plus_infinity),
                         Rounding::toward_minus_infinity);
        if (lower.sign() < 0) lower = Real(prec);
        GuaranteeResult r{a.epsilon_star, Real(delta_g, prec), Method::approx_optimal,
                          Bracket{std::move(lower), a.epsilon_star}, cfg, false, false};
        if (details) {
          *details = ApproxDetails{*eta, a.a_star, a.discretization.a_total, a.discretization.beta,
                                   a.discretization.epsilon0, a.shrunk_delta_g};
        }
        return r;
      }
    }
    throw InvalidArgument("unknown method");
  }

  /// delta_g certified at epsilon_g by the method (1, flagged vacuous, when none).
  GuaranteeResult delta_for(Method method, const CompositionInstance& instance, const Rational& epsilon_g,
                            const std::optional<Rational>& eta) const {
    const PrecisionConfig& cfg = cfg_.precision;
    const mpfr_prec_t prec = cfg.mpfr_precision();
    if (epsilon_g < 0) throw InvalidArgument("epsilon_g must be non-negative");
    const Real eg(epsilon_g, prec, Rounding::toward_minus_infinity);
    Real delta(prec);
    bool heterogeneous = false;
    switch (method) {
      case Method::basic: {
        Rational delta_sum = 0;
        for (const auto& p : instance.params()) delta_sum += p.delta;
        delta = epsilon_g >= instance.eps_sum() ? Real(delta_sum, prec, Rounding::toward_plus_infinity)
                                                : Real(1.0, prec);
        heterogeneous = !instance.is_homogeneous();
        break;
      }
      case Method::advanced: {
        const PrivacyParams& p = require_homogeneous(instance, method);
        delta = advanced_delta_of_epsilon(p.epsilon, p.delta, instance.k(), eg, cfg);
        break;
      }
      case Method::homogeneous_optimal: {
        const PrivacyParams& p = require_homogeneous(instance, method);
        delta = homogeneous_delta_of_epsilon(p.epsilon, p.delta, instance.k(), eg, cfg);
        break;
      }
      case Method::exact_optimal:
        delta = exact_delta_of_epsilon(instance, eg, cfg, cfg_.enum_limit);
        break;
      case Method::approx_optimal: {
        if (!eta) throw InvalidArgument("approx-optimal requires eta");
        const SlotGuard guard(slots_);
        delta = approx_delta_of_epsilon(instance, eg, *eta, cfg, cfg_.approx);
        break;
      }
    }
    const bool vacuous = !(delta < Real(1.0, prec));
    GuaranteeResult r{eg, std::move(delta), method, std::nullopt, cfg, vacuous, heterogeneous};
    return r;
  }

 private:
  class SlotGuard {
   public:
    explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

   private:
    std::counting_semaphore<>& s_;
  };

  static unsigned worker_count(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
  }

  static double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }

  static const PrivacyParams& require_homogeneous(const CompositionInstance& instance, Method m) {
    if (!instance.is_homogeneous()) {
      throw InvalidArgument(std::string(method_name(m)) + " requires identical (epsilon, delta) for every mechanism");
    }
    return instance[0];
  }

  void check_limits(Method m, std::size_t k) const {
    if (m == Method::exact_optimal && k > cfg_.enum_limit) throw EnumerationTooLarge(k, cfg_.enum_limit);
    if (m == Method::approx_optimal && k > cfg_.max_k_approx) {
      throw LimitExceeded("k = " + std::to_string(k) + " exceeds the approximation limit " +
                          std::to_string(cfg_.max_k_approx));
    }
  }

  AccountantConfig cfg_;
  mutable std::counting_semaphore<> slots_;
};

}  // namespace dpcomp

#endif  // DPCOMP_ACCOUNTANT_HPP_
