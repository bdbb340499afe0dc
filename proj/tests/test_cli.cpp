/*
 * Copyright 2026 The skembed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "skembed/cli.hpp"

using namespace skembed;
using io::Json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string sample(const std::string& name) { return std::string(SKEMBED_SAMPLES_DIR) + "/" + name; }

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "skembed");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, SolveBoth) {
  const auto r = run({"solve", "--market", sample("market_interior.json"), "--lattice-steps", "12"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["status"], "OK");
  EXPECT_EQ(j["skembed_schema"], 1);
  EXPECT_TRUE(j["gap_ok"].get<bool>());
  EXPECT_LE(std::abs(j["gap"].get<double>()), j["gap_tolerance"].get<double>());
  EXPECT_EQ(j["primal"]["status"], "OPTIMAL");
  EXPECT_GE(j["dual"]["certificate_residual"].get<double>(), -1e-8);
}

TEST(Cli, SolveIsDeterministic) {
  const std::vector<std::string> args{"solve", "--market", sample("market_interior.json"), "--lattice-steps", "10",
                                      "--payoff", "LOOKBACK_MAX_CAPPED"};
  EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Cli, ArbitrageMarketRejected) {
  const auto r = run({"solve", "--market", sample("market_arbitrage.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("rejected"), std::string::npos);
  EXPECT_EQ(Json::parse(r.out)["status"], "REJECTED");
}

TEST(Cli, MetricsSameFileIsZero) {
  const auto r = run({"metrics", sample("mu_offgrid.json"), sample("mu_offgrid.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["metrics"]["rho"].get<double>(), 0.0);
  EXPECT_EQ(j["metrics"]["w1"].get<double>(), 0.0);
  EXPECT_TRUE(j["certificate"]["holds"].get<bool>());
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"solve"}).code, 1);
  EXPECT_EQ(run({"solve", "--market", sample("market_interior.json"), "--dt", "-1"}).code, 1);
  EXPECT_EQ(run({"solve", "--market", "/nonexistent.json"}).code, 1);
  EXPECT_EQ(run({"metrics", sample("mu_offgrid.json")}).code, 1);
  EXPECT_EQ(run({"solve", "--payoff", "CALL"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigFillsUnsetOptions) {
  const auto r = run({"solve", "--config", sample("config_solve.json"), "--market", sample("market_interior.json"),
                      "--method", "primal"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["payoff"]["kind"], "LOOKBACK_MAX_CAPPED");
  EXPECT_FALSE(j.contains("dual"));
}

TEST(Cli, RecoverAndCheckSg) {
  auto r = run({"recover", "--marginals", sample("mu_binomial.json"), "--levels", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = Json::parse(r.out);
  ASSERT_EQ(j["rows"].size(), 3u);
  EXPECT_NEAR(j["rows"][1]["rho"].get<double>(), 0.0, 1e-9);

  r = run({"check-sg", "--market", sample("market_interior.json"), "--lattice-steps", "8", "--payoff", "RANGE_CAPPED",
           "--cap", "0.375"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = Json::parse(r.out);
  EXPECT_TRUE(j["stop_go"]["violations"].empty());
  EXPECT_EQ(j["horizon_sg"], 8);
}

TEST(Io, MeasureRoundTrip) {
  const DiscreteMeasure mu({{-0.3, 0.25}, {0.1, 0.75}});
  EXPECT_EQ(io::measure_from_json(Json::parse(io::dump(io::to_json(mu)))), mu);
  const std::vector<DiscreteMeasure> two{mu, DiscreteMeasure({{-1, 0.5}, {0.8, 0.5}})};
  const auto back = io::marginals_from_json(io::to_json(two));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], two[1]);
}

TEST(Io, MarketRoundTrip) {
  MarketData mk;
  mk.strikes = {-0.5, 0.5};
  mk.calls = Matrix::from_rows({{0.6, 0.1}, {0.7, 0.2}});
  mk.power = PowerConstraint{4.0, 1.5};
  const auto back = io::market_from_json(Json::parse(io::dump(io::to_json(mk))));
  EXPECT_EQ(back.strikes, mk.strikes);
  EXPECT_EQ(back.calls.to_rows(), mk.calls.to_rows());
  ASSERT_TRUE(back.power.has_value());
  EXPECT_EQ(back.power->p, 4.0);
  EXPECT_EQ(back.power->V, 1.5);
}

TEST(Io, SchemaErrorsNameTheField) {
  const auto message = [](auto&& f) {
    try {
      f();
    } catch (const io::SchemaError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message([] { io::market_from_json(Json::parse(R"({"calls": [[0.1]]})")); }).find("'strikes'"),
            std::string::npos);
  EXPECT_NE(message([] { io::market_from_json(Json::parse(R"({"strikes": [0, 1], "calls": [[0.1]]})")); })
                .find("'calls[0]'"),
            std::string::npos);
  EXPECT_NE(message([] { io::measure_from_json(Json::parse(R"({"atoms": [[0, "x"]]})")); }).find("'atoms[0][1]'"),
            std::string::npos);
  EXPECT_NE(message([] { io::measure_from_json(Json::parse(R"({"atoms": [], "skembed_schema": 2})")); })
                .find("'skembed_schema'"),
            std::string::npos);
  EXPECT_NE(message([] { io::payoff_from_json(Json::parse(R"({"kind": "CALL", "cap": 1})")); }).find("'kind'"),
            std::string::npos);
}
