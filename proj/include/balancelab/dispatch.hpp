#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <utility>

#include "balancelab/algorithms.hpp"
#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/rng.hpp"

namespace balancelab {

struct SelectionDecision {
  ServerId chosen;  // meaningful only when !rejected
  Algorithm algorithm = Algorithm::kRoundrobin;
  bool fallback_used = false;
  bool rejected = false;

  explicit operator bool() const { return !rejected; }
};

// Selects a server and charges it one connection. A request no server can
// take (all down, or all at maxconn under `first`) yields a rejected decision
// and leaves the pool untouched.
inline SelectionDecision dispatch(const Request& request, BackendPool& pool,
                                  const AlgorithmConfig& config, Rng& rng) {
  SelectionDecision decision;
  decision.algorithm = config.kind;
  if (pool.up_count() == 0) {
    decision.rejected = true;
    return decision;
  }
  try {
    const Pick pick = select(pool, request, config, rng);
    pool.note_dispatch(pick.index);
    decision.chosen = pick.id;
    decision.fallback_used = pick.fallback_used;
  } catch (const Error& e) {
    if (e.code() != Errc::kEmptyPool && e.code() != Errc::kAllServersFull) throw;
    decision.rejected = true;
  }
  return decision;
}

inline void release(ServerId server, BackendPool& pool) { pool.note_release(server); }

// Live weight only; static_rr keeps the weights seen at construction and
// roundrobin picks the change up at its next cycle boundary.
inline void set_weight(BackendPool& pool, ServerId server, std::uint32_t new_weight) {
  pool.set_weight(server, new_weight);
}

// Serializes every pool mutation behind one mutex so that selection and the
// connection-count increment happen as a single step for concurrent callers.
class Balancer {
 public:
  Balancer(BackendPool pool, AlgorithmConfig config)
      : pool_(std::move(pool)), config_(std::move(config)), rng_(config_.rng_seed) {
    validate(config_);
  }

  SelectionDecision dispatch(const Request& request) {
    std::lock_guard lock(mu_);
    return balancelab::dispatch(request, pool_, config_, rng_);
  }

  void release(ServerId server) {
    std::lock_guard lock(mu_);
    balancelab::release(server, pool_);
  }

  void set_weight(ServerId server, std::uint32_t weight) {
    std::lock_guard lock(mu_);
    balancelab::set_weight(pool_, server, weight);
  }

  void set_up(ServerId server, bool up) {
    std::lock_guard lock(mu_);
    pool_.set_up(server, up);
  }

  void set_utilization(ServerId server, double utilization) {
    std::lock_guard lock(mu_);
    pool_.set_utilization(server, utilization);
  }

  BackendPool snapshot() const {
    std::lock_guard lock(mu_);
    return pool_;
  }

  const AlgorithmConfig& config() const { return config_; }

 private:
  mutable std::mutex mu_;
  BackendPool pool_;
  AlgorithmConfig config_;
  Rng rng_;
};

}  // namespace balancelab
