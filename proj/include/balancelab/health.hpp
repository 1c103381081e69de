#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/rng.hpp"

namespace balancelab {

struct HealthPolicy {
  double interval_s = 2.0;
  double spread_checks_pct = 0.0;  // each gap jittered uniformly in +/- this percent
  std::uint32_t rise = 2;          // consecutive successes to come back up
  std::uint32_t fall = 3;          // consecutive failures to go down
  double timeout_s = 1.0;
};

inline void validate(const HealthPolicy& p) {
  if (!(p.interval_s > 0.0)) throw Error(Errc::kInvalidConfig, "health interval must be positive");
  if (!(p.spread_checks_pct >= 0.0 && p.spread_checks_pct <= 50.0)) {
    throw Error(Errc::kInvalidConfig, "spread_checks_pct must lie in [0,50]");
  }
  if (p.rise < 1 || p.fall < 1) throw Error(Errc::kInvalidConfig, "rise and fall must be >= 1");
  if (!(p.timeout_s > 0.0)) throw Error(Errc::kInvalidConfig, "health timeout must be positive");
}

struct HealthStatus {
  ServerId server_id;
  bool up = true;
  std::uint32_t consecutive_failures = 0;
  std::uint32_t consecutive_successes = 0;
  double last_check = -1.0;  // seconds on the caller's clock; < 0 before the first probe
};

// Folds one probe outcome into `status`. Returns true when the up flag flipped.
inline bool record_probe(HealthStatus& status, bool success, const HealthPolicy& policy,
                         double now) {
  status.last_check = now;
  if (success) {
    status.consecutive_failures = 0;
    ++status.consecutive_successes;
    if (!status.up && status.consecutive_successes >= policy.rise) {
      status.up = true;
      return true;
    }
    return false;
  }
  status.consecutive_successes = 0;
  ++status.consecutive_failures;
  if (status.up && status.consecutive_failures >= policy.fall) {
    status.up = false;
    return true;
  }
  return false;
}

// Per-server probe times. Without spread every server shares the nominal
// grid start + k * interval; with spread p each server's next gap is
// interval * (1 + u), u uniform in [-p/100, p/100].
class ProbeSchedule {
 public:
  ProbeSchedule(std::size_t servers, HealthPolicy policy, std::uint64_t seed, double start = 0.0)
      : policy_(policy), rng_(seed), next_(servers, start) {
    validate(policy_);
  }

  double gap() {
    if (policy_.spread_checks_pct == 0.0) return policy_.interval_s;
    const double spread = policy_.spread_checks_pct / 100.0;
    return policy_.interval_s * (1.0 + rng_.uniform(-spread, spread));
  }

  // Marks server `i` as probed at its due time and schedules the next probe.
  double advance(std::size_t i) {
    next_[i] += gap();
    return next_[i];
  }

  double due(std::size_t i) const { return next_[i]; }

  double earliest() const {
    double best = std::numeric_limits<double>::infinity();
    for (double t : next_) best = t < best ? t : best;
    return best;
  }

  std::size_t size() const { return next_.size(); }

 private:
  HealthPolicy policy_;
  Rng rng_;
  std::vector<double> next_;
};

}  // namespace balancelab
