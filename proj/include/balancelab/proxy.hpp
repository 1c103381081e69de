#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/epoll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <httplib.h>

#include "balancelab/algorithms.hpp"
#include "balancelab/core.hpp"
#include "balancelab/dispatch.hpp"
#include "balancelab/error.hpp"
#include "balancelab/health.hpp"
#include "balancelab/http.hpp"

namespace balancelab {

struct BackendAddress {
  std::string name;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::uint32_t weight = 1;
  std::optional<std::uint32_t> maxconn;
};

using AccessLogSink = std::function<void(std::string_view line)>;

struct ProxyConfig {
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 8080;  // 0 picks an ephemeral port
  std::uint32_t maxconn = 2000;      // global cap on concurrent client connections
  std::uint32_t workers = 0;         // 0 = available cores
  AlgorithmConfig balance;
  std::vector<BackendAddress> servers;
  HealthPolicy health;
  bool health_checks = true;
  double backend_timeout_s = 30.0;
  AccessLogSink access_log;
};

inline std::uint32_t effective_workers(const ProxyConfig& config) {
  if (config.workers > 0) return config.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void validate(const ProxyConfig& config) {
  if (config.servers.empty()) throw Error(Errc::kInvalidConfig, "proxy needs at least one backend server");
  if (config.maxconn < 1) throw Error(Errc::kInvalidConfig, "maxconn must be >= 1");
  if (!(config.backend_timeout_s > 0.0)) throw Error(Errc::kInvalidConfig, "backend timeout must be positive");
  validate(config.balance);
  validate(config.health);
  for (const auto& s : config.servers) {
    if (s.port == 0) throw Error(Errc::kInvalidConfig, "backend " + s.name + " has no port");
    if (s.weight < 1) throw Error(Errc::kInvalidWeight, "backend " + s.name + " weight must be >= 1");
  }
}

// "host:port" -> (host, port).
inline std::pair<std::string, std::uint16_t> split_host_port(std::string_view text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(Errc::kInvalidConfig, "expected host:port, got '" + std::string(text) + "'");
  }
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
    throw Error(Errc::kInvalidConfig, "bad port in '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

inline std::string format_ipv4(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." +
         std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

inline sockaddr_in resolve_ipv4(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &found) != 0 || found == nullptr) {
    throw Error(Errc::kInvalidConfig, "cannot resolve " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(found->ai_addr)->sin_addr;
  freeaddrinfo(found);
  return addr;
}

struct ProxyStats {
  std::uint64_t accepted = 0;
  std::uint64_t completed = 0;  // responses relayed from a backend
  std::uint64_t rejected_maxconn = 0;
  std::uint64_t rejected_no_server = 0;
  std::uint64_t bad_requests = 0;
  std::uint64_t backend_errors = 0;
  std::uint32_t peak_in_flight = 0;
};

// Reverse proxy: N epoll workers share one listening socket, every exchange
// is one request per client connection and one `Connection: close` request
// upstream. Pool state lives in a Balancer, so dispatch, release and health
// transitions are serialized.
class Proxy {
 public:
  explicit Proxy(ProxyConfig config)
      : config_(std::move(config)), balancer_(make_pool(config_), config_.balance) {
    validate(config_);
    for (std::size_t i = 0; i < config_.servers.size(); ++i) {
      backends_.push_back(resolve_ipv4(config_.servers[i].host, config_.servers[i].port));
      health_.push_back(HealthStatus{ServerId{static_cast<std::uint32_t>(i + 1)}});
    }
  }

  Proxy(const Proxy&) = delete;
  Proxy& operator=(const Proxy&) = delete;

  ~Proxy() { stop(); }

  // Binds and spawns workers plus the health task. Throws kBindError.
  void start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw Error(Errc::kBindError, std::strerror(errno));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve_ipv4(config_.listen_host, config_.listen_port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 1024) != 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw Error(Errc::kBindError, config_.listen_host + ":" +
                                        std::to_string(config_.listen_port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    started_at_ = std::chrono::steady_clock::now();

    const std::uint32_t n = effective_workers(config_);
    for (std::uint32_t i = 0; i < n; ++i) {
      workers_.push_back(std::make_unique<Worker>(*this));
    }
    for (auto& w : workers_) w->thread = std::thread([this, raw = w.get()] { run_worker(*raw); });
    if (config_.health_checks) health_thread_ = std::thread([this] { run_health(); });
  }

  // Graceful drain: stop accepting, let in-flight exchanges finish, join.
  void stop() {
    if (stopping_.exchange(true)) {
      join();
      return;
    }
    {
      std::lock_guard lock(health_mu_);
      health_cv_.notify_all();
    }
    for (auto& w : workers_) {
      const std::uint64_t one = 1;
      [[maybe_unused]] auto n = ::write(w->wake_fd, &one, sizeof one);
    }
    join();
  }

  std::uint16_t port() const { return port_; }
  std::uint32_t worker_count() const { return static_cast<std::uint32_t>(workers_.size()); }
  Balancer& balancer() { return balancer_; }

  std::vector<HealthStatus> health() const {
    std::lock_guard lock(health_mu_);
    return health_;
  }

  ProxyStats stats() const {
    ProxyStats s;
    s.accepted = accepted_;
    s.completed = completed_;
    s.rejected_maxconn = rejected_maxconn_;
    s.rejected_no_server = rejected_no_server_;
    s.bad_requests = bad_requests_;
    s.backend_errors = backend_errors_;
    s.peak_in_flight = peak_in_flight_;
    return s;
  }

 private:
  struct Conn;

  struct Endpoint {
    Conn* conn;
    bool backend;
  };

  enum class Phase { kReadRequest, kConnect, kSendRequest, kReadResponse, kSendResponse };

  struct Conn {
    Conn() : client_ep{this, false}, backend_ep{this, true} {}
    int client_fd = -1;
    int backend_fd = -1;
    Endpoint client_ep;
    Endpoint backend_ep;
    Phase phase = Phase::kReadRequest;
    std::string in;
    http::RequestHead head;
    std::string upstream;
    std::size_t upstream_off = 0;
    std::string response;
    std::size_t response_off = 0;
    std::optional<std::size_t> server_index;
    bool released = true;
    std::uint32_t client_ip = 0;
    std::chrono::steady_clock::time_point started;
    std::chrono::steady_clock::time_point deadline;
    int status = 0;
    bool dead = false;
  };

  struct Worker {
    explicit Worker(Proxy& owner) {
      epoll_fd = ::epoll_create1(EPOLL_CLOEXEC);
      wake_fd = ::eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC);
      epoll_event ev{};
      ev.events = EPOLLIN;
      ev.data.ptr = &wake_tag;
      ::epoll_ctl(epoll_fd, EPOLL_CTL_ADD, wake_fd, &ev);
      ev.events = EPOLLIN | EPOLLEXCLUSIVE;
      ev.data.ptr = &listen_tag;
      ::epoll_ctl(epoll_fd, EPOLL_CTL_ADD, owner.listen_fd_, &ev);
    }
    ~Worker() {
      ::close(epoll_fd);
      ::close(wake_fd);
    }
    int epoll_fd = -1;
    int wake_fd = -1;
    Endpoint listen_tag{nullptr, false};
    Endpoint wake_tag{nullptr, true};
    std::unordered_set<Conn*> conns;
    std::thread thread;
  };

  static BackendPool make_pool(const ProxyConfig& config) {
    std::vector<ServerSpec> specs;
    for (std::size_t i = 0; i < config.servers.size(); ++i) {
      ServerSpec spec;
      spec.id = ServerId{static_cast<std::uint32_t>(i + 1)};
      spec.name = config.servers[i].name;
      spec.weight = config.servers[i].weight;
      spec.maxconn = config.servers[i].maxconn;
      specs.push_back(std::move(spec));
    }
    return BackendPool(std::move(specs));
  }

  void join() {
    for (auto& w : workers_) {
      if (w->thread.joinable()) w->thread.join();
    }
    if (health_thread_.joinable()) health_thread_.join();
    workers_.clear();
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
  }

  double seconds_since_start() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started_at_).count();
  }

  // ---- worker loop -------------------------------------------------------

  void run_worker(Worker& w) {
    std::vector<epoll_event> events(128);
    bool listening = true;
    std::vector<Conn*> graveyard;
    for (;;) {
      if (stopping_ && listening) {
        ::epoll_ctl(w.epoll_fd, EPOLL_CTL_DEL, listen_fd_, nullptr);
        listening = false;
      }
      if (stopping_ && w.conns.empty()) break;
      const int n = ::epoll_wait(w.epoll_fd, events.data(), static_cast<int>(events.size()), 100);
      for (int i = 0; i < n; ++i) {
        auto* ep = static_cast<Endpoint*>(events[i].data.ptr);
        if (ep == &w.listen_tag) {
          if (listening) accept_all(w);
          continue;
        }
        if (ep == &w.wake_tag) {
          std::uint64_t drained;
          [[maybe_unused]] auto r = ::read(w.wake_fd, &drained, sizeof drained);
          continue;
        }
        Conn* c = ep->conn;
        if (c->dead) continue;
        if (ep->backend) {
          on_backend_event(w, *c, events[i].events);
        } else {
          on_client_event(w, *c, events[i].events);
        }
      }
      expire(w);
      for (auto it = w.conns.begin(); it != w.conns.end();) {
        if ((*it)->dead) {
          graveyard.push_back(*it);
          it = w.conns.erase(it);
        } else {
          ++it;
        }
      }
      for (Conn* c : graveyard) delete c;
      graveyard.clear();
    }
  }

  void accept_all(Worker& w) {
    for (;;) {
      sockaddr_in peer{};
      socklen_t len = sizeof peer;
      const int fd = ::accept4(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len,
                               SOCK_NONBLOCK | SOCK_CLOEXEC);
      if (fd < 0) return;  // EAGAIN or transient error
      ++accepted_;
      const std::uint32_t before = in_flight_.fetch_add(1);
      if (before >= config_.maxconn) {
        in_flight_.fetch_sub(1);
        ++rejected_maxconn_;
        const std::string reply = http::simple_response(503, "maximum connections reached\n");
        [[maybe_unused]] auto sent = ::send(fd, reply.data(), reply.size(), MSG_NOSIGNAL);
        ::close(fd);
        log_line(ntohl(peer.sin_addr.s_addr), "-", "-", 503, "-", 0.0);
        continue;
      }
      std::uint32_t peak = peak_in_flight_.load();
      while (before + 1 > peak && !peak_in_flight_.compare_exchange_weak(peak, before + 1)) {
      }
      auto* c = new Conn;
      c->client_fd = fd;
      c->client_ip = ntohl(peer.sin_addr.s_addr);
      c->started = std::chrono::steady_clock::now();
      c->deadline = c->started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(config_.backend_timeout_s));
      w.conns.insert(c);
      watch(w, fd, EPOLL_CTL_ADD, EPOLLIN, &c->client_ep);
    }
  }

  static void watch(Worker& w, int fd, int op, std::uint32_t events, Endpoint* ep) {
    epoll_event ev{};
    ev.events = events;
    ev.data.ptr = ep;
    ::epoll_ctl(w.epoll_fd, op, fd, &ev);
  }

  void on_client_event(Worker& w, Conn& c, std::uint32_t events) {
    if (c.phase == Phase::kReadRequest) {
      char buf[16384];
      bool eof = false;
      for (;;) {
        const ssize_t n = ::recv(c.client_fd, buf, sizeof buf, 0);
        if (n > 0) {
          c.in.append(buf, static_cast<std::size_t>(n));
          continue;
        }
        if (n == 0) {
          eof = true;
          break;
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK) break;
        finish(w, c);
        return;
      }
      const auto parsed = http::parse_request_head(c.in);
      if (parsed.status == http::ParseStatus::kBad) {
        ++bad_requests_;
        respond(w, c, http::simple_response(400, parsed.error + "\n"), 400);
        return;
      }
      if (parsed.status == http::ParseStatus::kComplete &&
          c.in.size() >= parsed.head.head_bytes + parsed.head.content_length) {
        c.head = parsed.head;
        route(w, c);
        return;
      }
      // Peer gave up before a full request arrived.
      if (eof || (events & (EPOLLHUP | EPOLLERR))) finish(w, c);
      return;
    }
    if (c.phase == Phase::kSendResponse) {
      flush_response(w, c);
    }
  }

  void route(Worker& w, Conn& c) {
    const auto request =
        http::to_request(c.head, c.client_ip, next_request_id_++, seconds_since_start());
    if (!request) {
      ++bad_requests_;
      respond(w, c, http::simple_response(501, "only GET and POST are proxied\n"), 501);
      return;
    }
    const SelectionDecision decision = balancer_.dispatch(*request);
    if (decision.rejected) {
      ++rejected_no_server_;
      respond(w, c, http::simple_response(503, "no backend available\n"), 503);
      return;
    }
    c.server_index = decision.chosen.value - 1;
    c.released = false;
    c.upstream = http::upstream_head(c.head);
    c.upstream.append(c.in, c.head.head_bytes, c.head.content_length);
    watch(w, c.client_fd, EPOLL_CTL_MOD, 0, &c.client_ep);

    c.backend_fd = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
    if (c.backend_fd < 0) {
      backend_failed(w, c, 502);
      return;
    }
    const int one = 1;
    ::setsockopt(c.backend_fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    const sockaddr_in& addr = backends_[*c.server_index];
    const int rc = ::connect(c.backend_fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
    if (rc != 0 && errno != EINPROGRESS) {
      backend_failed(w, c, 502);
      return;
    }
    c.phase = Phase::kConnect;
    watch(w, c.backend_fd, EPOLL_CTL_ADD, EPOLLOUT, &c.backend_ep);
  }

  void on_backend_event(Worker& w, Conn& c, std::uint32_t events) {
    if (c.phase == Phase::kConnect) {
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(c.backend_fd, SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0 || (events & EPOLLERR)) {
        backend_failed(w, c, 502);
        return;
      }
      c.phase = Phase::kSendRequest;
    }
    if (c.phase == Phase::kSendRequest) {
      while (c.upstream_off < c.upstream.size()) {
        const ssize_t n = ::send(c.backend_fd, c.upstream.data() + c.upstream_off,
                                 c.upstream.size() - c.upstream_off, MSG_NOSIGNAL);
        if (n > 0) {
          c.upstream_off += static_cast<std::size_t>(n);
          continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
        backend_failed(w, c, 502);
        return;
      }
      c.phase = Phase::kReadResponse;
      watch(w, c.backend_fd, EPOLL_CTL_MOD, EPOLLIN | EPOLLRDHUP, &c.backend_ep);
      return;
    }
    if (c.phase == Phase::kReadResponse) {
      char buf[16384];
      bool eof = false;
      for (;;) {
        const ssize_t n = ::recv(c.backend_fd, buf, sizeof buf, 0);
        if (n > 0) {
          c.response.append(buf, static_cast<std::size_t>(n));
          continue;
        }
        if (n == 0) {
          eof = true;
          break;
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK) break;
        backend_failed(w, c, 502);
        return;
      }
      if (!eof && !response_complete(c.response)) return;
      const auto status = http::response_status(c.response);
      if (!status) {
        backend_failed(w, c, 502);
        return;
      }
      const std::size_t index = *c.server_index;
      close_backend(w, c);
      http::inject_header(c.response, "X-Balancelab-Server", config_.servers[index].name);
      ++completed_;
      c.status = *status;
      c.phase = Phase::kSendResponse;
      watch(w, c.client_fd, EPOLL_CTL_MOD, EPOLLOUT, &c.client_ep);
      flush_response(w, c);
    }
  }

  // A response is complete at EOF, or once Content-Length bytes of body arrived.
  static bool response_complete(std::string_view response) {
    const std::size_t end = response.find("\r\n\r\n");
    if (end == std::string_view::npos) return false;
    const std::string_view head = response.substr(0, end + 2);
    std::size_t pos = 0;
    while ((pos = head.find("\r\n", pos)) != std::string_view::npos) {
      pos += 2;
      const std::size_t eol = head.find("\r\n", pos);
      if (eol == std::string_view::npos) break;
      const std::string_view line = head.substr(pos, eol - pos);
      const std::size_t colon = line.find(':');
      if (colon != std::string_view::npos && iequals(line.substr(0, colon), "Content-Length")) {
        const std::string_view v = http::trim(line.substr(colon + 1));
        std::size_t n = 0;
        std::from_chars(v.data(), v.data() + v.size(), n);
        return response.size() >= end + 4 + n;
      }
    }
    return false;
  }

  void backend_failed(Worker& w, Conn& c, int status) {
    ++backend_errors_;
    const std::optional<std::size_t> index = c.server_index;
    close_backend(w, c);
    if (index) mark_failure(*index);
    respond(w, c, http::simple_response(status, "backend unavailable\n"), status);
  }

  void close_backend(Worker& w, Conn& c) {
    if (c.backend_fd >= 0) {
      ::epoll_ctl(w.epoll_fd, EPOLL_CTL_DEL, c.backend_fd, nullptr);
      ::close(c.backend_fd);
      c.backend_fd = -1;
    }
    if (!c.released && c.server_index) {
      balancer_.release(ServerId{static_cast<std::uint32_t>(*c.server_index + 1)});
      c.released = true;
    }
  }

  void respond(Worker& w, Conn& c, std::string response, int status) {
    c.response = std::move(response);
    c.response_off = 0;
    c.status = status;
    c.phase = Phase::kSendResponse;
    watch(w, c.client_fd, EPOLL_CTL_MOD, EPOLLOUT, &c.client_ep);
    flush_response(w, c);
  }

  void flush_response(Worker& w, Conn& c) {
    while (c.response_off < c.response.size()) {
      const ssize_t n = ::send(c.client_fd, c.response.data() + c.response_off,
                               c.response.size() - c.response_off, MSG_NOSIGNAL);
      if (n > 0) {
        c.response_off += static_cast<std::size_t>(n);
        continue;
      }
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
      break;
    }
    finish(w, c);
  }

  void finish(Worker& w, Conn& c) {
    if (c.dead) return;
    close_backend(w, c);
    if (c.status != 0) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - c.started).count();
      const std::string server = c.server_index ? config_.servers[*c.server_index].name : "-";
      const std::string path = c.head.target.empty() ? "-" : c.head.target.substr(0, c.head.target.find('?'));
      log_line(c.client_ip, c.head.method.empty() ? "-" : c.head.method, path, c.status, server, ms);
    }
    ::epoll_ctl(w.epoll_fd, EPOLL_CTL_DEL, c.client_fd, nullptr);
    ::close(c.client_fd);
    c.client_fd = -1;
    c.dead = true;
    in_flight_.fetch_sub(1);
  }

  void expire(Worker& w) {
    const auto now = std::chrono::steady_clock::now();
    for (Conn* c : w.conns) {
      if (c->dead || now < c->deadline) continue;
      switch (c->phase) {
        case Phase::kReadRequest:
        case Phase::kSendResponse:
          finish(w, *c);
          break;
        default:
          backend_failed(w, *c, 504);
      }
    }
  }

  void log_line(std::uint32_t ip, std::string_view method, std::string_view path, int status,
                std::string_view server, double ms) {
    if (!config_.access_log) return;
    const double epoch = std::chrono::duration<double>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
    char head[64];
    std::snprintf(head, sizeof head, "%.3f", epoch);
    char tail[32];
    std::snprintf(tail, sizeof tail, "%.3f", ms);
    std::string line = head;
    line.append(" ").append(format_ipv4(ip));
    line.append(" ").append(method).append(" ").append(path);
    line.append(" ").append(std::to_string(status)).append(" ").append(server);
    line.append(" ").append(tail);
    std::lock_guard lock(log_mu_);
    config_.access_log(line);
  }

  // ---- health ------------------------------------------------------------

  void mark_failure(std::size_t index) { apply_probe(index, false); }

  void apply_probe(std::size_t index, bool success) {
    std::lock_guard lock(health_mu_);
    HealthStatus& status = health_[index];
    if (record_probe(status, success, config_.health, seconds_since_start())) {
      balancer_.set_up(status.server_id, status.up);
    }
  }

  bool probe(std::size_t index) {
    const auto& server = config_.servers[index];
    httplib::Client client(server.host, server.port);
    const auto timeout = std::chrono::duration<double>(config_.health.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_keep_alive(false);
    auto result = client.Get("/");
    const bool ok = result && result->status < 500;
    if (ok && config_.balance.kind == Algorithm::kCpuRandom) {
      double utilization = 0.0;
      if (auto u = client.Get("/utilization"); u && u->status == 200) {
        try {
          utilization = std::clamp(std::stod(u->body), 0.0, 1.0);
        } catch (const std::exception&) {
          utilization = 0.0;
        }
      }
      balancer_.set_utilization(ServerId{static_cast<std::uint32_t>(index + 1)}, utilization);
    }
    return ok;
  }

  void run_health() {
    ProbeSchedule schedule(config_.servers.size(), config_.health, config_.balance.rng_seed);
    for (;;) {
      {
        std::unique_lock lock(health_mu_);
        const double wait_s = schedule.earliest() - seconds_since_start();
        if (wait_s > 0) {
          health_cv_.wait_for(lock, std::chrono::duration<double>(wait_s),
                              [this] { return stopping_.load(); });
        }
        if (stopping_) return;
      }
      const double now = seconds_since_start();
      for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule.due(i) > now) continue;
        const bool ok = probe(i);
        if (stopping_) return;
        apply_probe(i, ok);
        schedule.advance(i);
        while (schedule.due(i) < now) schedule.advance(i);
      }
    }
  }

  ProxyConfig config_;
  Balancer balancer_;
  std::vector<sockaddr_in> backends_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::chrono::steady_clock::time_point started_at_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint32_t> in_flight_{0};
  std::atomic<std::uint64_t> next_request_id_{0};

  std::atomic<std::uint64_t> accepted_{0};
  std::atomic<std::uint64_t> completed_{0};
  std::atomic<std::uint64_t> rejected_maxconn_{0};
  std::atomic<std::uint64_t> rejected_no_server_{0};
  std::atomic<std::uint64_t> bad_requests_{0};
  std::atomic<std::uint64_t> backend_errors_{0};
  std::atomic<std::uint32_t> peak_in_flight_{0};

  mutable std::mutex health_mu_;
  std::condition_variable health_cv_;
  std::vector<HealthStatus> health_;
  std::thread health_thread_;
  std::mutex log_mu_;
};

}  // namespace balancelab
