#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "balancelab/algorithms.hpp"
#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/harness.hpp"
#include "balancelab/proxy.hpp"
#include "balancelab/simcluster.hpp"
#include "balancelab/workload.hpp"

namespace balancelab {

// Loopback HTTP backend for proxy tests and sweeps. Every path answers 200
// after `delay`; POST bodies are echoed back. `GET /utilization` reports the
// value set through set_utilization, or 404 when none was set.
class EchoBackend {
 public:
  explicit EchoBackend(std::string name, std::chrono::microseconds delay = {},
                       std::string host = "127.0.0.1", std::uint16_t port = 0)
      : name_(std::move(name)), delay_(delay), host_(std::move(host)), port_(port) {
    server_.Get("/utilization", [this](const httplib::Request&, httplib::Response& res) {
      const double u = utilization_.load();
      if (u < 0.0) {
        res.status = 404;
        return;
      }
      res.set_content(std::to_string(u), "text/plain");
    });
    server_.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      pause();
      res.set_content(name_ + " " + req.path + "\n", "text/plain");
    });
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      pause();
      res.set_content(req.body, "application/octet-stream");
    });
  }

  EchoBackend(const EchoBackend&) = delete;
  EchoBackend& operator=(const EchoBackend&) = delete;

  ~EchoBackend() { stop(); }

  void start() {
    if (port_ == 0) {
      const int bound = server_.bind_to_any_port(host_);
      if (bound <= 0) throw Error(Errc::kBindError, "echo backend could not bind " + host_);
      port_ = static_cast<std::uint16_t>(bound);
    } else if (!server_.bind_to_port(host_, port_)) {
      throw Error(Errc::kBindError, "echo backend could not bind " + host_ + ":" + std::to_string(port_));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  // Stops and rebinds on the same port, for restart scenarios.
  void restart() {
    stop();
    start();
  }

  const std::string& name() const { return name_; }
  const std::string& host() const { return host_; }
  std::uint16_t port() const { return port_; }
  std::uint64_t hits() const { return hits_; }
  void set_utilization(double u) { utilization_ = u; }

  BackendAddress address(std::uint32_t weight = 1) const {
    BackendAddress a;
    a.name = name_;
    a.host = host_;
    a.port = port_;
    a.weight = weight;
    return a;
  }

 private:
  void pause() const {
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  }

  std::string name_;
  std::chrono::microseconds delay_;
  std::string host_;
  std::uint16_t port_;
  httplib::Server server_;
  std::thread thread_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<double> utilization_{-1.0};
};

struct LoadOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  double rate = 200.0;        // requests per second
  double duration_s = 30.0;
  unsigned clients = 16;      // concurrent client threads
  double timeout_s = 10.0;
};

struct LoadResult {
  SimResult sim;  // records carry measured wall-clock response times
  std::vector<std::string> served_by;  // X-Balancelab-Server per request, "" if absent
  std::vector<int> status;             // 0 when the request failed at transport level
};

// Replays `requests` against host:port as an open-loop stream: request i is
// due at its own arrival_time (a uniform schedule at `rate` when the stream
// comes from generate()). Response time runs from the due time, so queueing
// behind busy client threads is counted.
inline LoadResult run_load(std::span<const Request> requests, const LoadOptions& options) {
  if (options.clients < 1) throw Error(Errc::kInvalidConfig, "load generator needs >= 1 client");
  LoadResult out;
  out.sim.records.resize(requests.size());
  out.served_by.resize(requests.size());
  out.status.assign(requests.size(), 0);
  std::atomic<std::size_t> next{0};
  const auto t0 = std::chrono::steady_clock::now();
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(options.timeout_s));

  auto client_loop = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      const Request& r = requests[i];
      const auto due = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(r.arrival_time));
      std::this_thread::sleep_until(due);

      httplib::Client client(options.host, options.port);
      client.set_keep_alive(false);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      httplib::Headers headers;
      for (const auto& [name, value] : r.headers) headers.emplace(name, value);
      if (r.rdp_cookie) headers.emplace("Cookie", "mstshash=" + *r.rdp_cookie);
      std::string target = r.path;
      if (r.query) target += "?" + *r.query;
      httplib::Result result = r.method == Method::kGet
                                   ? client.Get(target, headers)
                                   : client.Post(target, headers, "payload=" + std::to_string(i),
                                                 "application/x-www-form-urlencoded");
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - due).count();

      MetricsRecord& rec = out.sim.records[i];
      rec.request_id = r.request_id;
      rec.task_type = r.method;
      rec.arrival_time = r.arrival_time;
      if (!result) {
        rec.rejected = true;
        continue;
      }
      out.status[i] = result->status;
      out.served_by[i] = result->get_header_value("X-Balancelab-Server");
      if (result->status != 200) {
        rec.rejected = true;
        continue;
      }
      rec.completed = true;
      rec.response_time = elapsed;
      rec.deadline_met = elapsed <= r.deadline;
    }
  };

  std::vector<std::thread> threads;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(options.clients, requests.size()));
  for (unsigned t = 0; t < n; ++t) threads.emplace_back(client_loop);
  for (auto& t : threads) t.join();

  out.sim.arrivals = requests.size();
  for (const auto& rec : out.sim.records) {
    if (rec.completed) ++out.sim.completions;
    if (rec.rejected) ++out.sim.rejections;
  }
  return out;
}

// Uniform open-loop stream of rate * duration requests drawn from the default
// site catalog.
inline std::vector<Request> load_stream(double rate, double duration_s, std::uint64_t seed = 1,
                                        double get_fraction = 0.5) {
  Scenario s;
  s.total_requests = static_cast<std::uint64_t>(std::llround(rate * duration_s));
  s.period_s = duration_s;
  s.get_fraction = get_fraction;
  s.seed = seed;
  return generate(s);
}

struct ProxySweepOptions {
  double rate = 200.0;
  double duration_s = 30.0;
  unsigned backends = 3;
  std::chrono::microseconds backend_delay{5000};
  unsigned clients = 16;
  AlgorithmConfig balance;
  std::uint64_t seed = 1;
};

// Proxy flavour of the worker sweep: one set of loopback backends, a fresh
// proxy per worker count, the same request stream each time. Each row's
// per_server_dispatch_counts come from the X-Balancelab-Server header.
inline std::vector<SummaryRow> worker_sweep_proxy(std::span<const std::uint32_t> worker_counts,
                                                  const ProxySweepOptions& options) {
  validate_worker_counts(worker_counts);
  if (options.backends < 1) throw Error(Errc::kInvalidConfig, "sweep needs >= 1 backend");
  std::vector<std::unique_ptr<EchoBackend>> backends;
  ProxyConfig base;
  base.listen_port = 0;
  base.balance = options.balance;
  base.health_checks = false;
  for (unsigned i = 0; i < options.backends; ++i) {
    backends.push_back(
        std::make_unique<EchoBackend>("srv" + std::to_string(i + 1), options.backend_delay));
    backends.back()->start();
    base.servers.push_back(backends.back()->address());
  }
  const auto requests = load_stream(options.rate, options.duration_s, options.seed);

  std::vector<SummaryRow> rows;
  for (std::uint32_t workers : worker_counts) {
    ProxyConfig config = base;
    config.workers = workers;
    Proxy proxy(config);
    proxy.start();
    LoadOptions load;
    load.port = proxy.port();
    load.rate = options.rate;
    load.duration_s = options.duration_s;
    load.clients = options.clients;
    LoadResult result = run_load(requests, load);
    proxy.stop();

    for (std::size_t i = 0; i < result.served_by.size(); ++i) {
      for (std::size_t b = 0; b < base.servers.size(); ++b) {
        if (result.served_by[i] == base.servers[b].name) {
          result.sim.records[i].server = ServerId{static_cast<std::uint32_t>(b + 1)};
        }
      }
    }
    for (Method type : {Method::kGet, Method::kPost}) {
      SummaryRow row = summarize(result.sim, type, base.servers.size());
      row.environment = "loopback";
      row.algorithm = std::string(to_string(options.balance.kind));
      row.total_requests = requests.size();
      row.workers = workers;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace balancelab
