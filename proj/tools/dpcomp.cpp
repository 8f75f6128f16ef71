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

// dpcomp: compose | curve | compare | allocate | serve

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dpcomp/accountant.hpp"
#include "dpcomp/service.hpp"

namespace {

using dpcomp::Json;

struct GlobalFlags {
  unsigned precision_bits = dpcomp::kDefaultPrecisionBits;
  std::size_t enum_limit = dpcomp::kDefaultEnumerationLimit;
  std::size_t rr_enum_limit = dpcomp::kDefaultRREnumerationLimit;
};

struct ComposeFlags {
  std::string eps;
  std::string delta = "0";
  std::optional<std::string> delta_g;
  std::optional<std::string> epsilon_g;
  std::string method = "auto";
  std::optional<std::string> eta;
  std::optional<std::string> delta_prime;
  bool verify = false;
};

struct CurveFlags {
  std::string eps;
  std::string delta = "0";
  std::string delta_g;
  std::string k_range;
  std::string methods = "basic,advanced,homogeneous-optimal";
  std::optional<std::string> eta;
  std::optional<std::string> delta_prime;
  std::string format = "csv";
};

struct CompareFlags {
  std::string eps = "0.005";
  std::string delta_g = "1/33554432";
  std::string k_range = "100:700:100";
};

struct AllocateFlags {
  std::string request;
  std::string weights;
  std::string names;
  std::string delta = "0";
  std::string epsilon_g;
  std::string delta_g;
  std::string method = "auto";
  std::optional<std::string> eta;
};

struct ServeFlags {
  std::string host = "0.0.0.0";
  std::optional<int> port;
};

dpcomp::AccountantConfig make_config(const GlobalFlags& g, bool enum_limit_given) {
  dpcomp::AccountantConfig cfg = dpcomp::apply_environment({});
  cfg.precision.precision_bits = g.precision_bits;
  cfg.rr_enum_limit = g.rr_enum_limit;
  // an explicit flag wins over DPCOMP_ENUM_LIMIT
  if (enum_limit_given) cfg.enum_limit = g.enum_limit;
  return cfg;
}

std::optional<dpcomp::Rational> optional_rational(const std::optional<std::string>& s, const char* field) {
  if (!s) return std::nullopt;
  return dpcomp::parse_rational_list(*s, field).at(0);
}

int run_compose(const dpcomp::Accountant& acc, const ComposeFlags& f) {
  dpcomp::ComposeRequest r;
  r.params = dpcomp::params_from_lists(dpcomp::parse_rational_list(f.eps, "eps"),
                                       dpcomp::parse_rational_list(f.delta, "delta"));
  r.delta_g = optional_rational(f.delta_g, "delta-g");
  r.epsilon_g = optional_rational(f.epsilon_g, "epsilon-g");
  r.method = dpcomp::parse_method_choice(f.method);
  r.eta = optional_rational(f.eta, "eta");
  r.delta_prime = optional_rational(f.delta_prime, "delta-prime");
  r.verify = f.verify;
  std::cout << dpcomp::to_json(acc.compose(r)).dump(2) << '\n';
  return 0;
}

int run_curve(const dpcomp::Accountant& acc, const CurveFlags& f) {
  std::map<std::string, std::string> fields{
      {"eps", f.eps}, {"delta", f.delta}, {"delta_g", f.delta_g}, {"k_range", f.k_range}, {"methods", f.methods}};
  if (f.eta) fields["eta"] = *f.eta;
  if (f.delta_prime) fields["delta_prime"] = *f.delta_prime;
  const auto rows = acc.curve(dpcomp::CurveRequest::from_fields(fields));
  if (f.format == "json") {
    std::cout << dpcomp::to_json(rows).dump(2) << '\n';
  } else {
    std::cout << dpcomp::to_csv(rows);
  }
  return 0;
}

// basic, advanced (delta' = delta_g / 2) and optimal epsilon_g per k, with ratios to optimal.
int run_compare(const dpcomp::Accountant& acc, const CompareFlags& f) {
  const dpcomp::Rational eps = dpcomp::parse_rational(f.eps);
  const dpcomp::Rational delta_g = dpcomp::parse_rational(f.delta_g);
  dpcomp::Rational half = delta_g / 2;
  half.canonicalize();
  const dpcomp::KRange range = dpcomp::KRange::parse(f.k_range);
  std::cout << "k,basic,advanced,optimal,basic_over_optimal,advanced_over_optimal\n";
  for (std::size_t k = range.start; k <= range.stop; k += range.step) {
    const auto inst = dpcomp::CompositionInstance::homogeneous({eps, 0}, k);
    const double basic = dpcomp::upper_double(
        acc.epsilon_for(dpcomp::Method::basic, inst, delta_g, std::nullopt, std::nullopt, nullptr).epsilon_g);
    const double advanced = dpcomp::upper_double(
        acc.epsilon_for(dpcomp::Method::advanced, inst, delta_g, std::nullopt, half, nullptr).epsilon_g);
    const double optimal = dpcomp::upper_double(
        acc.epsilon_for(dpcomp::Method::homogeneous_optimal, inst, delta_g, std::nullopt, std::nullopt, nullptr)
            .epsilon_g);
    std::printf("%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", k, basic, advanced, optimal, basic / optimal,
                advanced / optimal);
    if (range.stop - k < range.step) break;
  }
  return 0;
}

std::string read_all(const std::string& path) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), {});
  std::ifstream in(path);
  if (!in) throw dpcomp::InvalidArgument("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_allocate(const dpcomp::Accountant& acc, const AllocateFlags& f) {
  dpcomp::AllocationRequest r;
  if (!f.request.empty()) {
    r = dpcomp::AllocationRequest::from_json(Json::parse(read_all(f.request)));
  } else {
    if (f.weights.empty() || f.epsilon_g.empty() || f.delta_g.empty()) {
      throw dpcomp::InvalidArgument("allocate needs --request, or --weights with --epsilon-g and --delta-g");
    }
    const auto weights = dpcomp::parse_rational_list(f.weights, "weights");
    const auto deltas = dpcomp::parse_rational_list(f.delta, "delta");
    const auto names = f.names.empty() ? std::vector<std::string>{} : dpcomp::split_list(f.names);
    if (!names.empty() && names.size() != weights.size()) {
      throw dpcomp::InvalidArgument("--names must have one entry per weight");
    }
    const auto params = dpcomp::params_from_lists(weights, deltas);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      r.statistics.push_back({names.empty() ? "statistic_" + std::to_string(i) : names[i], weights[i],
                              params[i].delta});
    }
    r.epsilon_g = dpcomp::parse_rational(f.epsilon_g);
    r.delta_g = dpcomp::parse_rational(f.delta_g);
    r.method = dpcomp::parse_method_choice(f.method);
    r.eta = optional_rational(f.eta, "eta");
    r.validate();
  }
  std::cout << dpcomp::to_json(acc.allocate(r)).dump(2) << '\n';
  return 0;
}

int run_serve(const dpcomp::Accountant& acc, const ServeFlags& f) {
  const int port = f.port ? *f.port : dpcomp::port_from_environment();
  dpcomp::Service service(acc);
  std::cerr << "dpcomp " << dpcomp::kVersion << " listening on " << f.host << ':' << port << '\n';
  if (!service.listen(f.host, port)) {
    std::cerr << "error: cannot listen on " << f.host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential-privacy composition accountant"};
  app.set_version_flag("--version", std::string(dpcomp::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags global;
  app.add_option("--precision-bits", global.precision_bits, "MPFR working precision")->capture_default_str();
  app.add_option("--enum-limit", global.enum_limit, "largest k for exact enumeration")->capture_default_str();
  app.add_option("--rr-enum-limit", global.rr_enum_limit, "largest k for the four-outcome oracle")
      ->capture_default_str();

  ComposeFlags cf;
  auto* compose = app.add_subcommand("compose", "global guarantee for one composition");
  compose->add_option("--eps", cf.eps, "comma-separated epsilons")->required();
  compose->add_option("--delta", cf.delta, "comma-separated deltas, or one for all")->capture_default_str();
  auto* dg = compose->add_option("--delta-g", cf.delta_g, "target delta_g; solves for epsilon_g");
  auto* eg = compose->add_option("--epsilon-g", cf.epsilon_g, "target epsilon_g; solves for delta_g");
  dg->excludes(eg);
  compose->add_option("--method", cf.method, "basic, advanced, homogeneous-optimal, exact-optimal, approx-optimal, auto")
      ->capture_default_str();
  compose->add_option("--eta", cf.eta, "additive accuracy of approx-optimal");
  compose->add_option("--delta-prime", cf.delta_prime, "slack for advanced composition");
  compose->add_flag("--verify", cf.verify, "cross-check delta_g by four-outcome enumeration");

  CurveFlags vf;
  auto* curve = app.add_subcommand("curve", "epsilon_g against k for homogeneous compositions");
  curve->add_option("--eps", vf.eps)->required();
  curve->add_option("--delta", vf.delta)->capture_default_str();
  curve->add_option("--delta-g", vf.delta_g)->required();
  curve->add_option("--k-range", vf.k_range, "start:stop:step")->required();
  curve->add_option("--methods", vf.methods)->capture_default_str();
  curve->add_option("--eta", vf.eta);
  curve->add_option("--delta-prime", vf.delta_prime);
  curve->add_option("--format", vf.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  CompareFlags mf;
  auto* compare = app.add_subcommand("compare", "basic, advanced and optimal bounds side by side");
  compare->add_option("--eps", mf.eps)->capture_default_str();
  compare->add_option("--delta-g", mf.delta_g)->capture_default_str();
  compare->add_option("--k-range", mf.k_range)->capture_default_str();

  AllocateFlags af;
  auto* allocate = app.add_subcommand("allocate", "split a global budget across weighted statistics");
  allocate->add_option("--request", af.request, "JSON allocation request file, '-' for stdin");
  allocate->add_option("--weights", af.weights);
  allocate->add_option("--names", af.names);
  allocate->add_option("--delta", af.delta)->capture_default_str();
  allocate->add_option("--epsilon-g", af.epsilon_g);
  allocate->add_option("--delta-g", af.delta_g);
  allocate->add_option("--method", af.method)->capture_default_str();
  allocate->add_option("--eta", af.eta);

  ServeFlags sf;
  auto* serve = app.add_subcommand("serve", "HTTP JSON service");
  serve->add_option("--host", sf.host)->capture_default_str();
  serve->add_option("--port", sf.port, "defaults to DPCOMP_PORT or 8080");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*compose && !cf.delta_g && !cf.epsilon_g) {
      throw dpcomp::InvalidArgument("one of --delta-g and --epsilon-g is required");
    }
    const dpcomp::Accountant acc(make_config(global, app.count("--enum-limit") > 0));
    if (*compose) return run_compose(acc, cf);
    if (*curve) return run_curve(acc, vf);
    if (*compare) return run_compare(acc, mf);
    if (*allocate) return run_allocate(acc, af);
    if (*serve) return run_serve(acc, sf);
  } catch (...) {
    const dpcomp::ErrorReport e = dpcomp::describe_current_exception();
    std::cout << e.body.dump(2) << '\n';
    std::cerr << "error: " << e.body.value("message", std::string("unknown error")) << '\n';
    return e.exit_code;
  }
  return 1;
}
