#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "balancelab/simcluster.hpp"
#include "balancelab/workload.hpp"

using namespace balancelab;

namespace {

EnvironmentProfile single(std::uint32_t cores, double ghz = 1.80) {
  return EnvironmentProfile{"single", {{cores, ghz, 8.0, "test"}}, {}};
}

Request at(std::uint64_t id, double t, Method m) {
  Request r;
  r.request_id = id;
  r.arrival_time = t;
  r.method = m;
  return r;
}

SimResult simulate(const EnvironmentProfile& env, const std::vector<Request>& requests,
                   AlgorithmConfig config = {}, ServiceModel model = {},
                   std::optional<std::uint32_t> maxconn_per_core = std::nullopt) {
  BackendPool pool = make_pool(env, maxconn_per_core);
  return run_simulation(requests, pool, config, model);
}

}  // namespace

TEST(ServiceRate, ProcessorSharingFormula) {
  const HardwareProfile hw{4, 3.6, 8.0, ""};
  EXPECT_DOUBLE_EQ(service_rate(hw, 1), 2.0);
  EXPECT_DOUBLE_EQ(service_rate(hw, 4), 2.0);
  EXPECT_DOUBLE_EQ(service_rate(hw, 8), 1.0);
  EXPECT_DOUBLE_EQ(cpu_utilization(hw, 2), 0.5);
  EXPECT_DOUBLE_EQ(cpu_utilization(hw, 9), 1.0);
}

TEST(Simulator, LoneRequestTakesItsBaseCost) {
  const auto r = simulate(single(1), {at(0, 0.0, Method::kGet), at(1, 1.0, Method::kPost)});
  EXPECT_DOUBLE_EQ(r.records[0].response_time, 0.05);
  EXPECT_DOUBLE_EQ(r.records[1].response_time, 0.15);
  EXPECT_TRUE(r.records[0].deadline_met);
}

// Hand-solved: on one core, a POST (0.15) starts at 0 and a GET (0.05) joins
// at 0.05. Alone until 0.05 the POST gets 0.05 of work; then both run at half
// rate, the GET needs 0.1 s and leaves at 0.15 having let the POST reach
// 0.10; the POST finishes its last 0.05 alone at 0.20.
TEST(Simulator, TwoTaskProcessorSharingHandSolution) {
  const auto r = simulate(single(1), {at(0, 0.0, Method::kPost), at(1, 0.05, Method::kGet)});
  EXPECT_NEAR(r.records[0].response_time, 0.20, 1e-12);
  EXPECT_NEAR(r.records[1].response_time, 0.10, 1e-12);
}

TEST(Simulator, SimultaneousEqualTasksShareEvenly) {
  const auto r = simulate(single(1), {at(0, 0.0, Method::kGet), at(1, 0.0, Method::kGet)});
  EXPECT_NEAR(r.records[0].response_time, 0.1, 1e-12);
  EXPECT_NEAR(r.records[1].response_time, 0.1, 1e-12);
}

TEST(Simulator, NoSlowdownUpToCoreCount) {
  std::vector<Request> reqs;
  for (int i = 0; i < 16; ++i) reqs.push_back(at(i, 0.0, Method::kGet));
  for (const auto& rec : simulate(single(16), reqs).records) {
    EXPECT_NEAR(rec.response_time, 0.05, 1e-12);
  }
}

TEST(Simulator, FasterCoresScaleServiceTime) {
  const auto r = simulate(single(1, 3.6), {at(0, 0.0, Method::kPost)});
  EXPECT_NEAR(r.records[0].response_time, 0.075, 1e-12);
}

TEST(Simulator, NetworkLatencyAddsConstant) {
  ServiceModel m;
  m.network_latency_s = 0.01;
  const auto r = simulate(single(1), {at(0, 0.0, Method::kGet)}, {}, m);
  EXPECT_NEAR(r.records[0].response_time, 0.06, 1e-12);
}

TEST(Simulator, CompletionBeforeArrivalAtEqualTimes) {
  BackendPool pool = make_pool(single(1));
  std::vector<SimEvent> events;
  SimOptions options;
  options.on_event = [&](const SimEvent& e, const BackendPool&) { events.push_back(e); };
  const std::vector<Request> reqs = {at(0, 0.0, Method::kGet), at(1, 0.05, Method::kGet)};
  run_simulation(reqs, pool, {}, {}, options);
  ASSERT_EQ(events.size(), 4u);
  EXPECT_EQ(events[1].kind, SimEventKind::kCompletion);
  EXPECT_EQ(events[1].request_id, 0u);
  EXPECT_EQ(events[2].kind, SimEventKind::kArrival);
}

TEST(Simulator, EventOrdering) {
  SimEvent a{1.0, SimEventKind::kArrival, 1, std::nullopt};
  SimEvent c{1.0, SimEventKind::kCompletion, 9, ServerId{1}};
  SimEvent b{1.0, SimEventKind::kArrival, 2, std::nullopt};
  EXPECT_LT(c, a);
  EXPECT_LT(a, b);
}

TEST(Simulator, FirstRejectsBeyondMaxconn) {
  std::vector<Request> reqs;
  for (int i = 0; i < 5; ++i) reqs.push_back(at(i, 0.0, Method::kGet));
  AlgorithmConfig c;
  c.kind = Algorithm::kFirst;
  const auto r = simulate(single(1), reqs, c, {}, 3);
  EXPECT_EQ(r.rejections, 2u);
  EXPECT_EQ(r.completions, 3u);
  EXPECT_TRUE(r.records[4].rejected);
}

TEST(Simulator, HorizonLeavesWorkInFlight) {
  BackendPool pool = make_pool(single(1));
  SimOptions options;
  options.horizon = 0.1;
  const std::vector<Request> reqs = {at(0, 0.0, Method::kPost), at(1, 0.5, Method::kGet)};
  const auto r = run_simulation(reqs, pool, {}, {}, options);
  EXPECT_EQ(r.arrivals, 1u);
  EXPECT_EQ(r.in_flight, 1u);
  EXPECT_FALSE(r.records[0].completed);
  EXPECT_EQ(r.records[1].request_id, 1u);
}

// Property: every request is dispatched or rejected exactly once, connections
// stay within [0, maxconn], and with the run drained the delivered service
// equals the completed work. As in the harness, only `first` pools carry a
// finite maxconn.
TEST(Simulator, ConservationAndBoundsAcrossAlgorithms) {
  Scenario s;
  s.total_requests = 3000;
  s.period_s = 5.0;
  const auto requests = generate(s);
  for (Algorithm a : kAllAlgorithms) {
    for (const auto& env : {homogeneous_environment(), heterogeneous_environment()}) {
      AlgorithmConfig c;
      c.kind = a;
      std::optional<std::uint32_t> maxconn;
      if (a == Algorithm::kFirst) maxconn = 2;
      BackendPool pool = make_pool(env, maxconn);
      bool bounded = true;
      SimOptions options;
      options.on_event = [&](const SimEvent&, const BackendPool& p) {
        for (const auto& srv : p.servers()) {
          if (srv.spec.maxconn && srv.state.active_connections > *srv.spec.maxconn) bounded = false;
        }
      };
      const auto r = run_simulation(requests, pool, c, {}, options);
      EXPECT_TRUE(bounded) << to_string(a);
      EXPECT_EQ(r.arrivals, requests.size());
      EXPECT_EQ(r.completions + r.rejections, requests.size()) << to_string(a);
      if (a != Algorithm::kFirst) EXPECT_EQ(r.rejections, 0u);
      EXPECT_EQ(r.in_flight, 0u);
      EXPECT_NEAR(r.delivered_work, r.completed_work, 1e-6 * r.completed_work) << to_string(a);
      for (const auto& srv : pool.servers()) EXPECT_EQ(srv.state.active_connections, 0u);
    }
  }
}

TEST(Simulator, DeterministicForFixedSeed) {
  Scenario s;
  s.total_requests = 2000;
  s.arrival = ArrivalProcess::kPoisson;
  const auto requests = generate(s);
  AlgorithmConfig c;
  c.kind = Algorithm::kRandom;
  c.rng_seed = 77;
  const auto a = simulate(heterogeneous_environment(), requests, c);
  const auto b = simulate(heterogeneous_environment(), requests, c);
  EXPECT_EQ(a.records, b.records);
}

TEST(Environments, MatchPublishedHardware) {
  const auto homo = homogeneous_environment();
  ASSERT_EQ(homo.servers.size(), 5u);
  for (const auto& s : homo.servers) {
    EXPECT_EQ(s.cores, 16u);
    EXPECT_DOUBLE_EQ(s.core_speed_ghz, 1.80);
  }
  const auto het = heterogeneous_environment();
  const std::vector<std::uint32_t> cores = {4, 8, 16, 32, 48};
  const std::vector<double> ram = {16, 32, 64, 128, 192};
  ASSERT_EQ(het.servers.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(het.servers[i].cores, cores[i]);
    EXPECT_DOUBLE_EQ(het.servers[i].ram_gb, ram[i]);
    EXPECT_DOUBLE_EQ(het.servers[i].core_speed_ghz, 1.80);
  }
  EXPECT_EQ(het.servers[0].label, "m5.xlarge");
}

TEST(ServiceModel, ValidateRejectsNonPositiveCosts) {
  ServiceModel m;
  m.base_cost_get = 0;
  EXPECT_THROW(validate(m), Error);
}
