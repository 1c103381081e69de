#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "balancelab/algorithms.hpp"
#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/simcluster.hpp"
#include "balancelab/workload.hpp"

namespace balancelab {

// The seven algorithms compared in the default run.
inline std::vector<AlgorithmConfig> default_algorithms() {
  std::vector<AlgorithmConfig> out;
  for (Algorithm a : {Algorithm::kFirst, Algorithm::kSource, Algorithm::kRandom,
                      Algorithm::kLeastconn, Algorithm::kStaticRr, Algorithm::kRoundrobin,
                      Algorithm::kUri}) {
    AlgorithmConfig config;
    config.kind = a;
    out.push_back(config);
  }
  return out;
}

struct RunMatrix {
  std::vector<AlgorithmConfig> algorithms = default_algorithms();
  std::vector<Scenario> scenarios = scenario_suite(80000, 5000);
  std::vector<EnvironmentProfile> environments = {homogeneous_environment(),
                                                  heterogeneous_environment()};
  std::uint32_t repetitions = 3;
  std::uint64_t base_seed = 1;
  ServiceModel service;
  // Per-server maxconn (cores * value) applied only to `first` cells, which is
  // the only algorithm that consults it.
  std::uint32_t first_maxconn_per_core = 4;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct SummaryRow {
  std::string environment;
  std::string algorithm;
  std::uint64_t total_requests = 0;
  Method task_type = Method::kGet;
  double mean_response_s = 0.0;
  double p95_response_s = 0.0;
  double deadline_miss_fraction = 0.0;
  double rejected_count = 0.0;  // averaged over repetitions
  std::vector<double> per_server_dispatch_counts;
  std::optional<std::uint32_t> workers;

  double dispatched() const {
    double total = 0.0;
    for (double c : per_server_dispatch_counts) total += c;
    return total;
  }

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct CellError {
  std::string environment;
  std::string algorithm;
  std::uint64_t total_requests = 0;
  std::string message;
};

struct MatrixResult {
  std::vector<SummaryRow> rows;
  std::vector<CellError> errors;
};

// Nearest-rank percentile of an unsorted sample; NaN when empty.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const std::size_t index = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(index, values.size() - 1)];
}

// Per-task-type metrics of one run. Rejected requests are excluded from the
// response-time statistics and count as deadline misses, as do requests that
// never completed.
inline SummaryRow summarize(const SimResult& result, Method task_type, std::size_t server_count) {
  SummaryRow row;
  row.task_type = task_type;
  row.per_server_dispatch_counts.assign(server_count, 0.0);
  std::vector<double> times;
  std::uint64_t total = 0;
  std::uint64_t misses = 0;
  for (const auto& record : result.records) {
    if (record.task_type != task_type) continue;
    ++total;
    if (record.rejected) {
      row.rejected_count += 1.0;
      ++misses;
      continue;
    }
    if (record.server) row.per_server_dispatch_counts[record.server->value - 1] += 1.0;
    if (!record.completed) {
      ++misses;
      continue;
    }
    times.push_back(record.response_time);
    if (!record.deadline_met) ++misses;
  }
  double sum = 0.0;
  for (double t : times) sum += t;
  row.mean_response_s =
      times.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(times.size());
  row.p95_response_s = percentile(std::move(times), 95.0);
  row.deadline_miss_fraction =
      total == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(total);
  return row;
}

// Row order used for emission: (environment, algorithm, total_requests,
// task_type, workers).
inline bool row_less(const SummaryRow& a, const SummaryRow& b) {
  return std::tie(a.environment, a.algorithm, a.total_requests, a.task_type, a.workers) <
         std::tie(b.environment, b.algorithm, b.total_requests, b.task_type, b.workers);
}

namespace detail {

inline void accumulate(SummaryRow& into, const SummaryRow& add) {
  into.mean_response_s += add.mean_response_s;
  into.p95_response_s += add.p95_response_s;
  into.deadline_miss_fraction += add.deadline_miss_fraction;
  into.rejected_count += add.rejected_count;
  if (into.per_server_dispatch_counts.size() < add.per_server_dispatch_counts.size()) {
    into.per_server_dispatch_counts.resize(add.per_server_dispatch_counts.size(), 0.0);
  }
  for (std::size_t i = 0; i < add.per_server_dispatch_counts.size(); ++i) {
    into.per_server_dispatch_counts[i] += add.per_server_dispatch_counts[i];
  }
}

inline void scale(SummaryRow& row, double factor) {
  row.mean_response_s *= factor;
  row.p95_response_s *= factor;
  row.deadline_miss_fraction *= factor;
  row.rejected_count *= factor;
  for (double& c : row.per_server_dispatch_counts) c *= factor;
}

// Runs `count` independent jobs on up to `threads` workers.
template <typename Job>
void parallel_for(std::size_t count, unsigned threads, Job&& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// One simulation of `requests` against a fresh pool for `env`.
inline SimResult simulate_cell(std::span<const Request> requests, const EnvironmentProfile& env,
                               const AlgorithmConfig& config, const ServiceModel& service,
                               std::uint32_t first_maxconn_per_core) {
  std::optional<std::uint32_t> maxconn;
  if (config.kind == Algorithm::kFirst) maxconn = first_maxconn_per_core;
  BackendPool pool = make_pool(env, maxconn);
  return run_simulation(requests, pool, config, service);
}

// One SummaryRow per (environment, algorithm, scenario, task type), averaged
// over repetitions; repetition r seeds both the workload and the algorithm
// with base_seed + r. A failing cell is reported and skipped.
inline MatrixResult run_matrix(const RunMatrix& matrix) {
  if (matrix.algorithms.empty() || matrix.scenarios.empty() || matrix.environments.empty()) {
    throw Error(Errc::kInvalidConfig, "run matrix needs at least one algorithm, scenario and environment");
  }
  if (matrix.repetitions < 1) throw Error(Errc::kInvalidConfig, "repetitions must be >= 1");
  validate(matrix.service);

  MatrixResult out;
  std::mutex out_mu;
  const std::size_t cells = matrix.algorithms.size() * matrix.environments.size();

  for (const Scenario& scenario : matrix.scenarios) {
    // [cell][type] accumulated over repetitions.
    std::vector<std::array<SummaryRow, 2>> acc(cells);
    std::vector<std::optional<std::string>> failed(cells);

    for (std::uint32_t rep = 0; rep < matrix.repetitions; ++rep) {
      Scenario seeded = scenario;
      seeded.seed = matrix.base_seed + rep;
      std::vector<Request> requests;
      try {
        requests = generate(seeded);
      } catch (const Error& e) {
        for (auto& f : failed) f = e.what();
        break;
      }
      detail::parallel_for(cells, matrix.threads, [&](std::size_t cell) {
        if (failed[cell]) return;
        const auto& env = matrix.environments[cell / matrix.algorithms.size()];
        AlgorithmConfig config = matrix.algorithms[cell % matrix.algorithms.size()];
        config.rng_seed = matrix.base_seed + rep;
        try {
          const SimResult result = simulate_cell(requests, env, config, matrix.service,
                                                 matrix.first_maxconn_per_core);
          for (Method type : {Method::kGet, Method::kPost}) {
            detail::accumulate(acc[cell][type == Method::kGet ? 0 : 1],
                               summarize(result, type, env.servers.size()));
          }
        } catch (const Error& e) {
          failed[cell] = e.what();
        }
      });
    }

    for (std::size_t cell = 0; cell < cells; ++cell) {
      const auto& env = matrix.environments[cell / matrix.algorithms.size()];
      const auto& config = matrix.algorithms[cell % matrix.algorithms.size()];
      if (failed[cell]) {
        std::lock_guard lock(out_mu);
        out.errors.push_back({env.name, std::string(to_string(config.kind)),
                              scenario.total_requests, *failed[cell]});
        continue;
      }
      for (std::size_t t = 0; t < 2; ++t) {
        SummaryRow row = acc[cell][t];
        detail::scale(row, 1.0 / static_cast<double>(matrix.repetitions));
        row.environment = env.name;
        row.algorithm = std::string(to_string(config.kind));
        row.total_requests = scenario.total_requests;
        row.task_type = t == 0 ? Method::kGet : Method::kPost;
        out.rows.push_back(std::move(row));
      }
    }
  }
  std::sort(out.rows.begin(), out.rows.end(), row_less);
  return out;
}

inline void validate_worker_counts(std::span<const std::uint32_t> counts) {
  if (counts.empty()) throw Error(Errc::kInvalidWorkerCount, "no worker counts given");
  for (std::uint32_t c : counts) {
    if (c < 1) throw Error(Errc::kInvalidWorkerCount, "worker count must be >= 1");
  }
}

inline std::vector<std::uint32_t> default_worker_counts() { return {1, 2, 4, 8, 16, 32, 64}; }

// Simulator flavour of the worker sweep. The event loop is single-threaded and
// independent of the dispatch worker count, so every count yields the same
// metrics; rows are labelled with the count.
inline std::vector<SummaryRow> worker_sweep_sim(std::span<const std::uint32_t> worker_counts,
                                                const Scenario& scenario,
                                                const EnvironmentProfile& environment,
                                                const AlgorithmConfig& config = {},
                                                const ServiceModel& service = {}) {
  validate_worker_counts(worker_counts);
  std::vector<SummaryRow> rows;
  const auto requests = generate(scenario);
  for (std::uint32_t workers : worker_counts) {
    const SimResult result = simulate_cell(requests, environment, config, service, 4);
    for (Method type : {Method::kGet, Method::kPost}) {
      SummaryRow row = summarize(result, type, environment.servers.size());
      row.environment = environment.name;
      row.algorithm = std::string(to_string(config.kind));
      row.total_requests = scenario.total_requests;
      row.workers = workers;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace balancelab
