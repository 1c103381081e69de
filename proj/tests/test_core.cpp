#include <gtest/gtest.h>

#include <thread>

#include "balancelab/core.hpp"
#include "balancelab/dispatch.hpp"
#include "support.hpp"

using namespace balancelab;
using testing_support::pool_with;

TEST(Headers, LookupIgnoresCaseAndKeepsOrder) {
  Headers h;
  h.add("Host", "a.example");
  h.add("X-Trace", "1");
  h.add("host", "b.example");
  ASSERT_NE(h.find("HOST"), nullptr);
  EXPECT_EQ(*h.find("HOST"), "a.example");
  EXPECT_EQ(h.find("Cookie"), nullptr);
  EXPECT_EQ(h.begin()->first, "Host");
  EXPECT_EQ(h.size(), 3u);
}

TEST(Method, ParseIsCaseSensitive) {
  EXPECT_EQ(parse_method("GET"), Method::kGet);
  EXPECT_EQ(parse_method("POST"), Method::kPost);
  EXPECT_FALSE(parse_method("get"));
  EXPECT_FALSE(parse_method("PUT"));
}

TEST(Request, ValidateRejectsRelativeAndEmptySegments) {
  Request r;
  r.path = "/blog/";
  EXPECT_NO_THROW(validate(r));
  r.path = "blog";
  EXPECT_THROW(validate(r), Error);
  r.path = "/a//b";
  EXPECT_THROW(validate(r), Error);
  r.path = "/";
  r.deadline = 0.0;
  try {
    validate(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidRequest);
  }
}

TEST(BackendPool, SortsByIdAndSumsWeights) {
  std::vector<ServerSpec> specs(3);
  specs[0].id = ServerId{7};
  specs[1].id = ServerId{2};
  specs[2].id = ServerId{4};
  specs[0].weight = 3;
  BackendPool pool(specs);
  EXPECT_EQ(pool.at(0).spec.id.value, 2u);
  EXPECT_EQ(pool.at(2).spec.id.value, 7u);
  EXPECT_EQ(pool.sum_weight(), 5u);
  EXPECT_EQ(pool.index_of(ServerId{4}), 1u);
  EXPECT_FALSE(pool.index_of(ServerId{5}));
}

TEST(BackendPool, RejectsBadSpecs) {
  std::vector<ServerSpec> dup(2);
  dup[0].id = dup[1].id = ServerId{1};
  EXPECT_THROW(BackendPool{dup}, Error);

  std::vector<ServerSpec> zero(1);
  EXPECT_THROW(BackendPool{zero}, Error);

  std::vector<ServerSpec> weightless(1);
  weightless[0].id = ServerId{1};
  weightless[0].weight = 0;
  try {
    BackendPool p(weightless);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidWeight);
  }
}

TEST(BackendPool, SetUpRecomputesSumWeight) {
  auto pool = pool_with({2, 3, 1});
  pool.set_up(ServerId{2}, false);
  EXPECT_EQ(pool.sum_weight(), 3u);
  EXPECT_EQ(pool.up_count(), 2u);
  pool.set_up(ServerId{2}, true);
  EXPECT_EQ(pool.sum_weight(), 6u);
}

TEST(BackendPool, SetWeightValidates) {
  auto pool = pool_with({1, 1});
  pool.set_weight(ServerId{1}, 4);
  EXPECT_EQ(pool.sum_weight(), 5u);
  EXPECT_EQ(pool.static_weights()[0], 1u);
  try {
    pool.set_weight(ServerId{1}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidWeight);
  }
  try {
    pool.set_weight(ServerId{9}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownServer);
  }
}

TEST(BackendPool, ReleaseUnderflowThrows) {
  auto pool = pool_with({1});
  try {
    release(ServerId{1}, pool);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnderflowRelease);
  }
}

TEST(BackendPool, UtilizationMustBeAFraction) {
  auto pool = pool_with({1});
  EXPECT_THROW(pool.set_utilization(ServerId{1}, 1.5), Error);
  pool.set_utilization(ServerId{1}, 0.25);
  EXPECT_DOUBLE_EQ(pool.at(0).state.cpu_utilization, 0.25);
}

TEST(Dispatch, CountsConnectionsAndRejectsEmptyPool) {
  auto pool = pool_with({1, 1});
  AlgorithmConfig config;
  Rng rng(1);
  const auto d = dispatch(testing_support::get(), pool, config, rng);
  ASSERT_TRUE(d);
  EXPECT_EQ(pool.server(d.chosen).state.active_connections, 1u);
  EXPECT_EQ(pool.server(d.chosen).state.total_dispatched, 1u);
  release(d.chosen, pool);
  EXPECT_EQ(pool.server(d.chosen).state.active_connections, 0u);

  pool.set_up(ServerId{1}, false);
  pool.set_up(ServerId{2}, false);
  const auto none = dispatch(testing_support::get(), pool, config, rng);
  EXPECT_TRUE(none.rejected);
  EXPECT_FALSE(none);
}

TEST(Dispatch, DownServerNeverChosen) {
  for (Algorithm a : kAllAlgorithms) {
    auto pool = pool_with({1, 2, 1});
    pool.set_up(ServerId{2}, false);
    AlgorithmConfig config;
    config.kind = a;
    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
      auto r = testing_support::get("/p" + std::to_string(i), 0x0a000000u + i);
      r.query = "k=" + std::to_string(i);
      const auto d = dispatch(r, pool, config, rng);
      ASSERT_TRUE(d) << to_string(a);
      EXPECT_NE(d.chosen.value, 2u) << to_string(a);
      release(d.chosen, pool);
    }
  }
}

TEST(Balancer, SerializesConcurrentDispatchAndRelease) {
  Balancer balancer(pool_with({1, 1, 1}), AlgorithmConfig{});
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 2000; ++i) {
        const auto d = balancer.dispatch(testing_support::get());
        balancer.release(d.chosen);
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto snapshot = balancer.snapshot();
  std::uint64_t total = 0;
  for (const auto& s : snapshot.servers()) {
    EXPECT_EQ(s.state.active_connections, 0u);
    total += s.state.total_dispatched;
  }
  EXPECT_EQ(total, 8000u);
}

TEST(Error, CodesHaveNames) {
  EXPECT_EQ(to_string(Errc::kAllServersFull), std::string_view("AllServersFull"));
  Error e(Errc::kIoError, "disk");
  EXPECT_EQ(e.code(), Errc::kIoError);
}
