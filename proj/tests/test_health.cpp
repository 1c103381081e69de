#include <gtest/gtest.h>

#include "balancelab/health.hpp"

using namespace balancelab;

TEST(HealthStatus, DownAfterFallUpAfterRise) {
  HealthPolicy p;
  HealthStatus s{ServerId{1}};
  EXPECT_FALSE(record_probe(s, false, p, 1));
  EXPECT_FALSE(record_probe(s, false, p, 2));
  EXPECT_TRUE(record_probe(s, false, p, 3));
  EXPECT_FALSE(s.up);
  EXPECT_FALSE(record_probe(s, true, p, 4));
  EXPECT_TRUE(record_probe(s, true, p, 5));
  EXPECT_TRUE(s.up);
  EXPECT_DOUBLE_EQ(s.last_check, 5);
}

TEST(HealthStatus, SuccessResetsFailureStreak) {
  HealthPolicy p;
  HealthStatus s{ServerId{1}};
  record_probe(s, false, p, 1);
  record_probe(s, false, p, 2);
  record_probe(s, true, p, 3);
  record_probe(s, false, p, 4);
  record_probe(s, false, p, 5);
  EXPECT_TRUE(s.up);
  EXPECT_EQ(s.consecutive_failures, 2u);
}

TEST(HealthStatus, ThresholdsConfigurable) {
  HealthPolicy p;
  p.fall = 1;
  HealthStatus s{ServerId{1}};
  EXPECT_TRUE(record_probe(s, false, p, 0));
}

TEST(ProbeSchedule, NoSpreadMeansIdenticalNominalTimes) {
  ProbeSchedule sched(4, HealthPolicy{}, 1);
  for (int cycle = 0; cycle < 5; ++cycle) {
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_DOUBLE_EQ(sched.due(i), 2.0 * cycle);
      sched.advance(i);
    }
  }
}

TEST(ProbeSchedule, SpreadBoundsGaps) {
  HealthPolicy p;
  p.spread_checks_pct = 50;
  ProbeSchedule sched(3, p, 9);
  double lo = 10, hi = 0;
  for (int k = 0; k < 5000; ++k) {
    const std::size_t i = static_cast<std::size_t>(k % 3);
    const double before = sched.due(i);
    const double gap = sched.advance(i) - before;
    EXPECT_GE(gap, 1.0);
    EXPECT_LE(gap, 3.0);
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
  }
  EXPECT_LT(lo, 1.1);
  EXPECT_GT(hi, 2.9);
  EXPECT_NE(sched.due(0), sched.due(1));
}

TEST(HealthPolicy, ValidateBounds) {
  HealthPolicy p;
  p.spread_checks_pct = 51;
  EXPECT_THROW(validate(p), Error);
  p = HealthPolicy{};
  p.interval_s = 0;
  EXPECT_THROW(validate(p), Error);
}
