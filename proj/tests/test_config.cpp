#include <gtest/gtest.h>

#include <sstream>

#include "balancelab/config.hpp"

using namespace balancelab;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

Errc code_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return Errc::kIoError;
}

}  // namespace

TEST(Config, EmptyFileKeepsDefaults) {
  const Config c = parse("");
  EXPECT_EQ(c.matrix.algorithms.size(), 7u);
  EXPECT_EQ(c.matrix.scenarios.size(), 17u);
  EXPECT_EQ(c.matrix.environments.size(), 2u);
  EXPECT_EQ(c.matrix.repetitions, 3u);
  EXPECT_DOUBLE_EQ(c.proxy.health.interval_s, 2.0);
  EXPECT_EQ(c.sweep.counts, default_worker_counts());
}

TEST(Config, SimulationAndAlgorithmKnobs) {
  const Config c = parse(
      "[simulation]\nmax_total = 20000\nstep = 10000\nget_fraction = 0.25\narrival = poisson\n"
      "deadline_s = 2\nbase_seed = 9\nrepetitions = 1\nalgorithms = random, uri\n"
      "[algorithm]\npower_n = 3\nuri_depth = 1\n"
      "[service]\nbase_cost_post = 0.3\n");
  ASSERT_EQ(c.matrix.scenarios.size(), 3u);
  EXPECT_EQ(c.matrix.scenarios[2].total_requests, 20000u);
  EXPECT_EQ(c.matrix.scenarios[1].arrival, ArrivalProcess::kPoisson);
  EXPECT_DOUBLE_EQ(c.matrix.scenarios[0].deadline_s, 2.0);
  EXPECT_EQ(c.matrix.base_seed, 9u);
  ASSERT_EQ(c.matrix.algorithms.size(), 2u);
  EXPECT_EQ(c.matrix.algorithms[0].power_n, 3u);
  EXPECT_EQ(c.matrix.algorithms[1].kind, Algorithm::kUri);
  EXPECT_EQ(c.matrix.algorithms[1].uri_depth, 1u);
  EXPECT_DOUBLE_EQ(c.matrix.service.base_cost_post, 0.3);
}

TEST(Config, CustomEnvironment) {
  const Config c = parse(
      "[simulation]\nenvironments = tiny\n[environment.tiny]\nservers = 2:3.0:4:3, 1:1.8:2\n");
  ASSERT_EQ(c.matrix.environments.size(), 1u);
  const auto& env = c.matrix.environments[0];
  EXPECT_EQ(env.name, "tiny");
  ASSERT_EQ(env.servers.size(), 2u);
  EXPECT_EQ(env.servers[0].cores, 2u);
  EXPECT_DOUBLE_EQ(env.servers[0].core_speed_ghz, 3.0);
  EXPECT_EQ(env.weights, (std::vector<std::uint32_t>{3, 1}));
}

TEST(Config, ProxySection) {
  const Config c = parse(
      "[proxy]\nlisten = 0.0.0.0:8081\nmaxconn = 10\nworkers = 2\nbalance = leastconn\n"
      "spread_checks_pct = 25\nrise = 1\nfall = 2\n"
      "server.b = 127.0.0.1:9002 weight=3 maxconn=7\nserver.a = localhost:9001\n");
  EXPECT_EQ(c.proxy.listen_host, "0.0.0.0");
  EXPECT_EQ(c.proxy.listen_port, 8081);
  EXPECT_EQ(c.proxy.maxconn, 10u);
  EXPECT_EQ(c.proxy.workers, 2u);
  EXPECT_EQ(c.proxy.balance.kind, Algorithm::kLeastconn);
  EXPECT_DOUBLE_EQ(c.proxy.health.spread_checks_pct, 25.0);
  ASSERT_EQ(c.proxy.servers.size(), 2u);
  EXPECT_EQ(c.proxy.servers[0].name, "a");
  EXPECT_EQ(c.proxy.servers[1].weight, 3u);
  EXPECT_EQ(c.proxy.servers[1].maxconn, 7u);
  EXPECT_NO_THROW(validate(c.proxy));
}

TEST(Config, SweepSection) {
  const Config c = parse("[sweep]\ncounts = 1, 64\nmode = proxy\nrate = 50\nbackend_delay_ms = 2.5\n");
  EXPECT_EQ(c.sweep.counts, (std::vector<std::uint32_t>{1, 64}));
  EXPECT_EQ(c.sweep.mode, SweepMode::kProxy);
  EXPECT_DOUBLE_EQ(c.sweep.proxy.rate, 50.0);
  EXPECT_EQ(c.sweep.proxy.backend_delay.count(), 2500);
}

TEST(Config, ErrorsAreConfigErrors) {
  EXPECT_EQ(code_of("[simulation]\nrepetitons = 2\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[bogus]\nx = 1\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[simulation]\nrepetitions = many\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[simulation]\nalgorithms = wlc\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[simulation]\nenvironments = mars\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[simulation]\nstep = 0\n"), Errc::kInvalidStep);
  EXPECT_EQ(code_of("[proxy]\nserver.a = nohost\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[proxy]\nspread_checks_pct = 80\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("[sweep]\ncounts = 0\n"), Errc::kInvalidWorkerCount);
  EXPECT_EQ(code_of("[environment.x]\nservers = 4:1.8\n"), Errc::kInvalidConfig);
  EXPECT_EQ(code_of("not ini [\n"), Errc::kInvalidConfig);
}

TEST(Config, ShippedFilesParse) {
  for (const char* name : {"default.ini", "example.ini", "proxy.ini"}) {
    EXPECT_NO_THROW(load_config(std::string(BALANCELAB_SOURCE_DIR) + "/configs/" + name)) << name;
  }
}

TEST(HostPort, Splits) {
  EXPECT_EQ(split_host_port("h:80"), (std::pair<std::string, std::uint16_t>{"h", 80}));
  EXPECT_THROW(split_host_port("h:99999"), Error);
  EXPECT_THROW(split_host_port(":80"), Error);
}
