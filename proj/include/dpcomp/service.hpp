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

#ifndef DPCOMP_SERVICE_HPP_
#define DPCOMP_SERVICE_HPP_

#include <cstdlib>
#include <map>
#include <string>

#include "dpcomp/accountant.hpp"
#include "httplib.h"

namespace dpcomp {

inline constexpr int kDefaultPort = 8080;

/// DPCOMP_PORT, or 8080.
inline int port_from_environment() {
  const char* v = std::getenv("DPCOMP_PORT");
  if (v == nullptr || *v == '\0') return kDefaultPort;
  char* end = nullptr;
  const long p = std::strtol(v, &end, 10);
  if (*end != '\0' || p < 0 || p > 65535) throw InvalidArgument("DPCOMP_PORT must be a port number");
  return static_cast<int>(p);
}

/// JSON endpoints over an Accountant:
///   POST /v1/compose, POST /v1/allocate, GET /v1/curve, GET /v1/health.
class Service {
 public:
  explicit Service(const Accountant& accountant) : accountant_(accountant) { routes(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  /// Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (...) {
      const ErrorReport e = describe_current_exception();
      send_json(res, e.http_status, e.body);
    }
  }

  void routes() {
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, Json{{"status", "ok"}, {"version", std::string(kVersion)}});
    });

    server_.Post("/v1/compose", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const ComposeRequest r = ComposeRequest::from_json(Json::parse(req.body));
        send_json(res, 200, to_json(accountant_.compose(r)));
      });
    });

    server_.Post("/v1/allocate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const AllocationRequest r = AllocationRequest::from_json(Json::parse(req.body));
        send_json(res, 200, to_json(accountant_.allocate(r)));
      });
    });

    server_.Get("/v1/curve", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::map<std::string, std::string> fields;
        for (const auto& [key, value] : req.params) fields[key] = value;
        std::string format = "json";
        if (auto it = fields.find("format"); it != fields.end()) {
          format = it->second;
          fields.erase(it);
        }
        if (format != "json" && format != "csv") throw InvalidArgument("format must be json or csv");
        const auto rows = accountant_.curve(CurveRequest::from_fields(fields));
        if (format == "csv") {
          res.status = 200;
          res.set_content(to_csv(rows), "text/csv");
        } else {
          send_json(res, 200, to_json(rows));
        }
      });
    });
  }

  const Accountant& accountant_;
  httplib::Server server_;
};

}  // namespace dpcomp

#endif  // DPCOMP_SERVICE_HPP_
