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

#include "dpcomp/service.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#ifndef DPCOMP_CLI_PATH
#error "DPCOMP_CLI_PATH must name the dpcomp binary"
#endif

namespace dpcomp {
namespace {

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    AccountantConfig cfg;
    cfg.enum_limit = 12;
    cfg.max_k_approx = 400;
    accountant_ = new Accountant(cfg);
    service_ = new Service(*accountant_);
    port_ = service_->bind_any();
    ASSERT_GT(port_, 0);
    thread_ = new std::thread([] { service_->listen_after_bind(); });
    service_->wait_until_ready();
  }

  static void TearDownTestSuite() {
    service_->stop();
    thread_->join();
    delete thread_;
    delete service_;
    delete accountant_;
  }

  static httplib::Client client() {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    return c;
  }

  static httplib::Result post(const std::string& path, const std::string& body) {
    return client().Post(path, body, "application/json");
  }

  static Accountant* accountant_;
  static Service* service_;
  static std::thread* thread_;
  static int port_;
};

Accountant* ServiceTest::accountant_ = nullptr;
Service* ServiceTest::service_ = nullptr;
std::thread* ServiceTest::thread_ = nullptr;
int ServiceTest::port_ = 0;

const char* kLnBody = R"({
  "params": [{"epsilon": "0.6931471805599453", "delta": "0"},
             {"epsilon": "1.0986122886681098", "delta": "0"}],
  "target": {"delta_g": "0.25"},
  "method": "exact-optimal"
})";

TEST_F(ServiceTest, Health) {
  auto res = client().Get("/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const Json j = Json::parse(res->body);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["version"], std::string(kVersion));
}

TEST_F(ServiceTest, ComposeExample) {
  auto res = post("/v1/compose", kLnBody);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const Json j = Json::parse(res->body);
  EXPECT_NEAR(j["epsilon_g"].get<double>(), std::log(3.0), 1e-12);
  EXPECT_EQ(j["method"], "exact-optimal");
  EXPECT_EQ(j["precision"]["precision_bits"], 128);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
}

TEST_F(ServiceTest, InfeasibleDeltaIs422WithThreshold) {
  auto res = post("/v1/compose", R"({"params": [{"epsilon": "0.1", "delta": "0.1"},
                                                {"epsilon": "0.1", "delta": "0.1"}],
                                     "target": {"delta_g": "0.1"}})");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  const Json j = Json::parse(res->body);
  EXPECT_EQ(j["reason"], "infeasible_delta");
  EXPECT_NEAR(j["threshold"].get<double>(), 0.19, 1e-15);
}

TEST_F(ServiceTest, LimitsAre413) {
  Json body{{"params", Json::array()}, {"target", {{"delta_g", "0.001"}}}, {"method", "exact-optimal"}};
  for (int i = 0; i < 13; ++i) body["params"].push_back({{"epsilon", "0.1"}, {"delta", "0"}});
  auto res = post("/v1/compose", body.dump());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
  EXPECT_EQ(Json::parse(res->body)["reason"], "limit_exceeded");

  auto curve = client().Get("/v1/curve?eps=0.1&delta_g=0.001&k_range=401&methods=approx-optimal&eta=0.1");
  ASSERT_TRUE(curve);
  EXPECT_EQ(curve->status, 413);
}

TEST_F(ServiceTest, MalformedIs400) {
  for (const char* body : {"{", "[]", R"({"params": []})", R"({"params": [{"epsilon": "x", "delta": "0"}],
                                                                "target": {"delta_g": "0.1"}})"}) {
    auto res = post("/v1/compose", body);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400) << body;
    EXPECT_EQ(Json::parse(res->body)["reason"], "invalid_request");
  }
  auto res = client().Get("/v1/curve?eps=0.1");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, AllocateEndpoint) {
  auto res = post("/v1/allocate", R"({
    "statistics": [{"name": "a", "weight": "1", "delta": "0"},
                   {"name": "b", "weight": "1", "delta": "0"}],
    "global": {"epsilon_g": "0.8", "delta_g": "0"}
  })");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const Json j = Json::parse(res->body);
  EXPECT_NEAR(j["allocations"][0]["epsilon"].get<double>(), 0.4, 1e-15);
  EXPECT_EQ(j["method"], "exact-optimal");
  EXPECT_TRUE(j.contains("precision"));

  auto zero = post("/v1/allocate", R"({"statistics": [{"weight": "1"}], "global": {"epsilon_g": "0", "delta_g": "0"}})");
  ASSERT_TRUE(zero);
  EXPECT_EQ(zero->status, 422);
  EXPECT_EQ(Json::parse(zero->body)["reason"], "zero_budget");
}

TEST_F(ServiceTest, CurveEndpoint) {
  auto res = client().Get("/v1/curve?eps=0.1&delta=0&delta_g=0.000001&k_range=1:5:2&methods=basic,exact-optimal");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const Json j = Json::parse(res->body);
  ASSERT_EQ(j.size(), 6u);
  EXPECT_EQ(j[0]["k"], 1);
  EXPECT_EQ(j[0]["method"], "basic");
  EXPECT_EQ(j[5]["k"], 5);
  EXPECT_EQ(j[5]["method"], "exact-optimal");

  auto csv = client().Get("/v1/curve?eps=0.1&delta_g=0.000001&k_range=2&methods=basic&format=csv");
  ASSERT_TRUE(csv);
  EXPECT_EQ(csv->body, "k,method,epsilon_g\n2,basic,0.2\n");
}

TEST_F(ServiceTest, ConcurrentRequestsAgree) {
  const std::string expected = Json::parse(post("/v1/compose", kLnBody)->body).value("epsilon_g", Json()).dump();
  std::vector<std::thread> threads;
  std::vector<std::string> seen(6);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    threads.emplace_back([&, i] {
      auto res = post("/v1/compose", kLnBody);
      seen[i] = res ? Json::parse(res->body).value("epsilon_g", Json()).dump() : "";
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& s : seen) EXPECT_EQ(s, expected);
}

// ---------------------------------------------------------------------------
// The CLI and the service share one code path; their numeric fields must match.

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

CommandResult run(const std::string& args) {
  const std::string cmd = std::string(DPCOMP_CLI_PATH) + " " + args + " 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  CommandResult r;
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) r.out.append(buf, n);
  const int status = pclose(pipe.release());
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Json without_runtime(Json j) {
  j.erase("runtime_ms");
  return j;
}

TEST_F(ServiceTest, CliParityForCompose) {
  const struct {
    std::string cli;
    Json body;
  } cases[] = {
      {"compose --eps 0.6931471805599453,1.0986122886681098 --delta 0,0 --delta-g 0.25 --method exact-optimal",
       Json::parse(kLnBody)},
      {"compose --eps 0.1 --delta 0 --delta-g 0 --method basic",
       Json{{"params", {{{"epsilon", "0.1"}, {"delta", "0"}}}}, {"target", {{"delta_g", "0"}}}, {"method", "basic"}}},
      {"compose --eps 0.2,0.3,0.1 --delta 0.001 --epsilon-g 0.4 --method auto",
       Json{{"params",
             {{{"epsilon", "0.2"}, {"delta", "0.001"}},
              {{"epsilon", "0.3"}, {"delta", "0.001"}},
              {{"epsilon", "0.1"}, {"delta", "0.001"}}}},
            {"target", {{"epsilon_g", "0.4"}}}}},
  };
  for (const auto& c : cases) {
    const CommandResult cli = run("--enum-limit 12 " + c.cli);
    ASSERT_EQ(cli.exit_code, 0) << c.cli;
    auto res = post("/v1/compose", c.body.dump());
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(without_runtime(Json::parse(cli.out)).dump(), without_runtime(Json::parse(res->body)).dump()) << c.cli;
  }
}

TEST_F(ServiceTest, CliCurveMatchesServiceCsv) {
  const CommandResult cli =
      run("curve --eps 0.005 --delta 0 --delta-g 1/33554432 --k-range 100:300:100 --methods basic,homogeneous-optimal");
  ASSERT_EQ(cli.exit_code, 0);
  auto res = client().Get(
      "/v1/curve?eps=0.005&delta=0&delta_g=1/33554432&k_range=100:300:100&methods=basic,homogeneous-optimal"
      "&format=csv");
  ASSERT_TRUE(res);
  EXPECT_EQ(cli.out, res->body);
  EXPECT_EQ(cli.out.rfind("k,method,epsilon_g\n100,basic,0.5\n", 0), 0u);
}

TEST_F(ServiceTest, CliExitCodes) {
  const CommandResult infeasible = run("compose --eps 0.1,0.1 --delta 0.1 --delta-g 0.1 --method exact-optimal");
  EXPECT_EQ(infeasible.exit_code, 2);
  EXPECT_EQ(Json::parse(infeasible.out)["reason"], "infeasible_delta");
  EXPECT_EQ(run("compose --eps 0.1 --delta 0").exit_code, 1);
  EXPECT_EQ(run("compose --eps 0.1 --delta-g 0.1 --epsilon-g 1").exit_code, 1);
  EXPECT_EQ(run("compose --eps abc --delta-g 0.1").exit_code, 1);
  EXPECT_EQ(run("nonsense").exit_code, 1);
  EXPECT_EQ(run("allocate --weights 1,1 --epsilon-g 0 --delta-g 0").exit_code, 2);
  EXPECT_EQ(run("--enum-limit 2 compose --eps 0.1,0.1,0.1 --delta-g 0.1 --method exact-optimal").exit_code, 1);
}

TEST_F(ServiceTest, CliAllocateMatchesService) {
  const CommandResult cli = run("allocate --weights 1,2 --names a,b --epsilon-g 1.0986 --delta-g 0.25 --method exact-optimal");
  ASSERT_EQ(cli.exit_code, 0);
  auto res = post("/v1/allocate", R"({
    "statistics": [{"name": "a", "weight": "1", "delta": "0"}, {"name": "b", "weight": "2", "delta": "0"}],
    "global": {"epsilon_g": "1.0986", "delta_g": "0.25"}, "method": "exact-optimal"
  })");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(without_runtime(Json::parse(cli.out)).dump(), without_runtime(Json::parse(res->body)).dump());
}

TEST_F(ServiceTest, CliCompareTable) {
  const CommandResult cli = run("compare --k-range 100:200:100");
  ASSERT_EQ(cli.exit_code, 0);
  EXPECT_EQ(cli.out.rfind("k,basic,advanced,optimal,basic_over_optimal,advanced_over_optimal\n100,0.5,", 0), 0u);
  EXPECT_EQ(std::count(cli.out.begin(), cli.out.end(), '\n'), 3);
}

}  // namespace
}  // namespace dpcomp
