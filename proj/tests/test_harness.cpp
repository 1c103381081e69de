#include <gtest/gtest.h>

#include <cmath>

#include "balancelab/harness.hpp"

using namespace balancelab;

namespace {

RunMatrix small_matrix() {
  RunMatrix m;
  m.scenarios = scenario_suite(10000, 5000);
  m.repetitions = 2;
  return m;
}

AlgorithmConfig algo(Algorithm kind) {
  AlgorithmConfig c;
  c.kind = kind;
  return c;
}

}  // namespace

TEST(Percentile, NearestRank) {
  EXPECT_DOUBLE_EQ(percentile({5, 1, 3, 2, 4}, 95), 5);
  EXPECT_DOUBLE_EQ(percentile({5, 1, 3, 2, 4}, 40), 2);
  EXPECT_DOUBLE_EQ(percentile({7}, 0), 7);
  EXPECT_TRUE(std::isnan(percentile({}, 50)));
}

TEST(Summarize, RejectionsCountAsMissesNotResponseTimes) {
  SimResult r;
  r.records.resize(4);
  r.records[0] = {0, Method::kGet, ServerId{1}, 0, 1.0, true, false, true, false};
  r.records[1] = {1, Method::kGet, ServerId{2}, 0, 5.0, false, false, true, false};
  r.records[2] = {2, Method::kGet, std::nullopt, 0, 0.0, false, true, false, false};
  r.records[3] = {3, Method::kPost, ServerId{1}, 0, 2.0, true, false, true, false};
  const auto row = summarize(r, Method::kGet, 2);
  EXPECT_DOUBLE_EQ(row.mean_response_s, 3.0);
  EXPECT_DOUBLE_EQ(row.deadline_miss_fraction, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(row.rejected_count, 1.0);
  EXPECT_EQ(row.per_server_dispatch_counts, (std::vector<double>{1, 1}));
}

TEST(RunMatrix, OneCellGivesTwoRows) {
  RunMatrix m;
  m.algorithms = {algo(Algorithm::kRoundrobin)};
  m.scenarios = {Scenario{}};
  m.environments = {homogeneous_environment()};
  m.repetitions = 1;
  const auto result = run_matrix(m);
  ASSERT_EQ(result.rows.size(), 2u);
  EXPECT_EQ(result.rows[0].task_type, Method::kGet);
  EXPECT_EQ(result.rows[1].task_type, Method::kPost);
}

TEST(RunMatrix, EmptyDimensionRejected) {
  RunMatrix m;
  m.algorithms.clear();
  EXPECT_THROW(run_matrix(m), Error);
}

TEST(RunMatrix, HomogeneousRoundRobinSpreadsEvenly) {
  RunMatrix m = small_matrix();
  m.algorithms = {algo(Algorithm::kRoundrobin)};
  m.environments = {homogeneous_environment()};
  m.repetitions = 1;
  const auto result = run_matrix(m);
  for (const auto& scenario : m.scenarios) {
    std::vector<double> total(5, 0.0);
    for (const auto& row : result.rows) {
      if (row.total_requests != scenario.total_requests) continue;
      for (std::size_t i = 0; i < 5; ++i) total[i] += row.per_server_dispatch_counts[i];
    }
    const auto [lo, hi] = std::minmax_element(total.begin(), total.end());
    EXPECT_LE(*hi - *lo, 1.0);
  }
}

TEST(RunMatrix, RowAccountingAndOrdering) {
  const auto result = run_matrix(small_matrix());
  EXPECT_TRUE(result.errors.empty());
  EXPECT_EQ(result.rows.size(), 7u * 3u * 2u * 2u);
  EXPECT_TRUE(std::is_sorted(result.rows.begin(), result.rows.end(), row_less));
  // dispatched + rejected = scenario total, per (env, algorithm, scenario).
  for (std::size_t i = 0; i + 1 < result.rows.size(); i += 2) {
    const auto& g = result.rows[i];
    const auto& p = result.rows[i + 1];
    ASSERT_EQ(g.algorithm, p.algorithm);
    EXPECT_NEAR(g.dispatched() + g.rejected_count + p.dispatched() + p.rejected_count,
                static_cast<double>(g.total_requests), 1e-9);
    for (const auto* row : {&g, &p}) {
      EXPECT_GE(row->deadline_miss_fraction, 0.0);
      EXPECT_LE(row->deadline_miss_fraction, 1.0);
    }
  }
}

TEST(RunMatrix, DeterministicAndThreadIndependent) {
  RunMatrix m = small_matrix();
  m.threads = 1;
  const auto a = run_matrix(m);
  m.threads = 4;
  const auto b = run_matrix(m);
  EXPECT_EQ(a.rows, b.rows);
}

TEST(RunMatrix, BadCellReportedWithoutAbortingOthers) {
  RunMatrix m = small_matrix();
  AlgorithmConfig broken = algo(Algorithm::kUri);
  broken.uri_use_path = false;
  m.algorithms = {algo(Algorithm::kRoundrobin), broken};
  const auto result = run_matrix(m);
  EXPECT_EQ(result.errors.size(), m.environments.size() * m.scenarios.size());
  EXPECT_EQ(result.rows.size(), m.environments.size() * m.scenarios.size() * 2);
}

TEST(WorkerSweep, SimulatorIsWorkerIndependent) {
  Scenario s;
  s.total_requests = 5000;
  const std::vector<std::uint32_t> counts = default_worker_counts();
  const auto rows = worker_sweep_sim(counts, s, homogeneous_environment());
  ASSERT_EQ(rows.size(), counts.size() * 2);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    SummaryRow a = rows[i];
    SummaryRow b = rows[i % 2];
    EXPECT_EQ(a.workers, counts[i / 2]);
    a.workers.reset();
    b.workers.reset();
    EXPECT_EQ(a, b);
  }
}

TEST(WorkerSweep, SingleCountGivesOneRowPair) {
  const std::vector<std::uint32_t> counts = {1};
  EXPECT_EQ(worker_sweep_sim(counts, Scenario{}, homogeneous_environment()).size(), 2u);
}

TEST(WorkerSweep, ZeroWorkersRejected) {
  const std::vector<std::uint32_t> counts = {4, 0};
  try {
    worker_sweep_sim(counts, Scenario{}, homogeneous_environment());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidWorkerCount);
  }
}
