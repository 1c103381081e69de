#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "balancelab/algorithms.hpp"
#include "balancelab/core.hpp"
#include "balancelab/dispatch.hpp"
#include "balancelab/error.hpp"
#include "balancelab/rng.hpp"

namespace balancelab {

struct ServiceModel {
  double base_cost_get = 0.05;   // single-core seconds at the reference speed
  double base_cost_post = 0.15;
  double reference_speed_ghz = 1.80;
  double network_latency_s = 0.0;  // added once to every response time

  double cost(Method m) const { return m == Method::kGet ? base_cost_get : base_cost_post; }
};

inline void validate(const ServiceModel& model) {
  if (!(model.base_cost_get > 0.0) || !(model.base_cost_post > 0.0)) {
    throw Error(Errc::kInvalidConfig, "service base costs must be positive");
  }
  if (!(model.reference_speed_ghz > 0.0)) {
    throw Error(Errc::kInvalidConfig, "reference speed must be positive");
  }
  if (model.network_latency_s < 0.0) {
    throw Error(Errc::kInvalidConfig, "network latency must be non-negative");
  }
}

struct EnvironmentProfile {
  std::string name;
  std::vector<HardwareProfile> servers;
  std::vector<std::uint32_t> weights;  // empty = weight 1 everywhere
};

inline EnvironmentProfile homogeneous_environment() {
  EnvironmentProfile env{"homogeneous", {}, {}};
  for (int i = 0; i < 5; ++i) env.servers.push_back({16, 1.80, 32.0, "16c-1.80GHz-32GB"});
  return env;
}

// m5.xlarge through m5.12xlarge, all at 1.80 GHz.
inline EnvironmentProfile heterogeneous_environment() {
  return EnvironmentProfile{"heterogeneous",
                            {
                                {4, 1.80, 16.0, "m5.xlarge"},
                                {8, 1.80, 32.0, "m5.2xlarge"},
                                {16, 1.80, 64.0, "m5.4xlarge"},
                                {32, 1.80, 128.0, "m5.8xlarge"},
                                {48, 1.80, 192.0, "m5.12xlarge"},
                            },
                            {}};
}

// Server ids 1..n follow the profile order. `maxconn_per_core`, when set,
// gives each server maxconn = cores * value.
inline BackendPool make_pool(const EnvironmentProfile& env,
                             std::optional<std::uint32_t> maxconn_per_core = std::nullopt) {
  if (env.servers.empty()) throw Error(Errc::kInvalidConfig, "environment has no servers");
  if (!env.weights.empty() && env.weights.size() != env.servers.size()) {
    throw Error(Errc::kInvalidConfig, "environment weights do not match server count");
  }
  std::vector<ServerSpec> specs;
  for (std::size_t i = 0; i < env.servers.size(); ++i) {
    ServerSpec spec;
    spec.id = ServerId{static_cast<std::uint32_t>(i + 1)};
    spec.name = "srv" + std::to_string(i + 1);
    spec.weight = env.weights.empty() ? 1 : env.weights[i];
    if (maxconn_per_core) spec.maxconn = env.servers[i].cores * *maxconn_per_core;
    spec.profile = env.servers[i];
    specs.push_back(std::move(spec));
  }
  return BackendPool(std::move(specs));
}

/// Per-task work-rate multiplier under processor sharing: each of the
/// `concurrent_tasks` tasks progresses at (speed / reference) * min(1, cores / tasks)
/// reference-core-seconds per second.
inline double service_rate(const HardwareProfile& server, std::uint32_t concurrent_tasks,
                           double reference_speed_ghz = 1.80) {
  const double speed_ratio = server.core_speed_ghz / reference_speed_ghz;
  if (concurrent_tasks <= server.cores) return speed_ratio;
  return speed_ratio * static_cast<double>(server.cores) / static_cast<double>(concurrent_tasks);
}

inline double cpu_utilization(const HardwareProfile& server, std::uint32_t concurrent_tasks) {
  return std::min(1.0, static_cast<double>(concurrent_tasks) / static_cast<double>(server.cores));
}

enum class SimEventKind { kCompletion = 0, kArrival = 1 };

struct SimEvent {
  double time = 0.0;
  SimEventKind kind = SimEventKind::kArrival;
  std::uint64_t request_id = 0;
  std::optional<ServerId> server;  // completions only

  // (time, completion before arrival, request_id)
  friend bool operator<(const SimEvent& a, const SimEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.request_id < b.request_id;
  }
};

struct MetricsRecord {
  std::uint64_t request_id = 0;
  Method task_type = Method::kGet;
  std::optional<ServerId> server;
  double arrival_time = 0.0;
  double response_time = 0.0;  // meaningless when rejected or unfinished
  bool deadline_met = false;
  bool rejected = false;
  bool completed = false;
  bool fallback_used = false;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct SimOptions {
  std::optional<double> horizon;  // stop processing events after this time
  std::function<void(const SimEvent&, const BackendPool&)> on_event;
};

struct SimResult {
  std::vector<MetricsRecord> records;  // one per request, in request order
  std::uint64_t arrivals = 0;
  std::uint64_t completions = 0;
  std::uint64_t rejections = 0;
  std::uint64_t in_flight = 0;    // still running when the loop stopped
  double delivered_work = 0.0;    // reference-core-seconds of service handed out
  double completed_work = 0.0;    // sum of base costs of completed requests
};

namespace detail {

// Processor-sharing server tracked in virtual time: every in-flight task has
// received the same attained service `attained`, so a task finishes when
// `attained` reaches its start mark plus its work.
class PsServer {
 public:
  PsServer(HardwareProfile profile, double reference_speed)
      : profile_(std::move(profile)), reference_speed_(reference_speed) {}

  void advance(double now, double& delivered) {
    if (!tasks_.empty() && now > clock_) {
      const double rate = service_rate(profile_, size(), reference_speed_);
      attained_ += rate * (now - clock_);
      delivered += rate * (now - clock_) * static_cast<double>(tasks_.size());
    }
    clock_ = std::max(clock_, now);
  }

  void admit(double now, double work, std::size_t record, double& delivered) {
    advance(now, delivered);
    tasks_.push({attained_ + work, record});
  }

  std::size_t finish(double now, double& delivered) {
    advance(now, delivered);
    const std::size_t record = tasks_.top().second;
    tasks_.pop();
    return record;
  }

  double next_completion() const {
    if (tasks_.empty()) return std::numeric_limits<double>::infinity();
    const double rate = service_rate(profile_, size(), reference_speed_);
    return clock_ + std::max(0.0, tasks_.top().first - attained_) / rate;
  }

  std::size_t next_record() const { return tasks_.top().second; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(tasks_.size()); }
  const HardwareProfile& profile() const { return profile_; }

 private:
  using Task = std::pair<double, std::size_t>;  // (finish mark, record index)

  HardwareProfile profile_;
  double reference_speed_;
  double clock_ = 0.0;
  double attained_ = 0.0;
  std::priority_queue<Task, std::vector<Task>, std::greater<>> tasks_;
};

}  // namespace detail

// Event loop over a time-ordered request stream. Arrivals go through
// dispatch(); completions go through release(). Deterministic for fixed seeds.
inline SimResult run_simulation(std::span<const Request> requests, BackendPool& pool,
                                const AlgorithmConfig& config, const ServiceModel& model,
                                const SimOptions& options = {}) {
  validate(config);
  validate(model);
  Rng rng(config.rng_seed);

  std::vector<detail::PsServer> servers;
  servers.reserve(pool.size());
  for (const auto& s : pool.servers()) servers.emplace_back(s.spec.profile, model.reference_speed_ghz);

  SimResult result;
  result.records.resize(requests.size());
  std::size_t next_arrival = 0;
  const double horizon = options.horizon.value_or(std::numeric_limits<double>::infinity());

  for (;;) {
    // Earliest completion; equal times resolve to the lower request id.
    std::optional<std::size_t> completing;
    double completion_time = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < servers.size(); ++i) {
      const double t = servers[i].next_completion();
      if (t < completion_time ||
          (completing && t == completion_time &&
           requests[servers[i].next_record()].request_id <
               requests[servers[*completing].next_record()].request_id)) {
        completion_time = t;
        completing = i;
      }
    }
    const double arrival_time = next_arrival < requests.size()
                                    ? requests[next_arrival].arrival_time
                                    : std::numeric_limits<double>::infinity();
    if (!completing && next_arrival >= requests.size()) break;

    if (completing && completion_time <= arrival_time) {
      if (completion_time > horizon) break;
      auto& server = servers[*completing];
      const std::size_t record_index = server.finish(completion_time, result.delivered_work);
      const ServerId id = pool.at(*completing).spec.id;
      release(id, pool);
      pool.set_utilization_at(*completing, cpu_utilization(server.profile(), server.size()));

      const Request& request = requests[record_index];
      auto& record = result.records[record_index];
      record.completed = true;
      record.response_time = completion_time - request.arrival_time + model.network_latency_s;
      record.deadline_met = record.response_time <= request.deadline;
      ++result.completions;
      result.completed_work += model.cost(request.method);
      if (options.on_event) {
        options.on_event(SimEvent{completion_time, SimEventKind::kCompletion, request.request_id, id},
                         pool);
      }
      continue;
    }

    if (arrival_time > horizon) break;
    const std::size_t record_index = next_arrival++;
    const Request& request = requests[record_index];
    auto& record = result.records[record_index];
    record.request_id = request.request_id;
    record.task_type = request.method;
    record.arrival_time = request.arrival_time;
    ++result.arrivals;

    const SelectionDecision decision = dispatch(request, pool, config, rng);
    if (decision.rejected) {
      record.rejected = true;
      ++result.rejections;
    } else {
      const std::size_t index = *pool.index_of(decision.chosen);
      auto& server = servers[index];
      server.admit(request.arrival_time, model.cost(request.method), record_index,
                   result.delivered_work);
      pool.set_utilization_at(index, cpu_utilization(server.profile(), server.size()));
      record.server = decision.chosen;
      record.fallback_used = decision.fallback_used;
    }
    if (options.on_event) {
      options.on_event(SimEvent{request.arrival_time, SimEventKind::kArrival, request.request_id,
                                std::nullopt},
                       pool);
    }
  }

  for (const auto& s : servers) result.in_flight += s.size();
  // Records for requests that never arrived before the horizon keep their ids.
  for (std::size_t i = next_arrival; i < requests.size(); ++i) {
    result.records[i].request_id = requests[i].request_id;
    result.records[i].task_type = requests[i].method;
    result.records[i].arrival_time = requests[i].arrival_time;
  }
  return result;
}

}  // namespace balancelab
