#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "balancelab/error.hpp"

namespace balancelab {

inline constexpr double kDefaultDeadlineSeconds = 3.0;

enum class Method { kGet, kPost };

constexpr std::string_view to_string(Method m) { return m == Method::kGet ? "GET" : "POST"; }

inline std::optional<Method> parse_method(std::string_view text) {
  if (text == "GET") return Method::kGet;
  if (text == "POST") return Method::kPost;
  return std::nullopt;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

// Insertion-ordered header list; lookups ignore the case of the name.
class Headers {
 public:
  using Entry = std::pair<std::string, std::string>;

  Headers() = default;
  Headers(std::initializer_list<Entry> entries) : entries_(entries) {}

  void add(std::string name, std::string value) {
    entries_.emplace_back(std::move(name), std::move(value));
  }

  // First value stored under `name`, or nullptr.
  const std::string* find(std::string_view name) const {
    for (const auto& [key, value] : entries_) {
      if (iequals(key, name)) return &value;
    }
    return nullptr;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const Headers&, const Headers&) = default;

 private:
  std::vector<Entry> entries_;
};

struct Request {
  std::uint64_t request_id = 0;
  double arrival_time = 0.0;
  Method method = Method::kGet;
  std::string path = "/";
  std::optional<std::string> query;
  Headers headers;
  std::uint32_t client_ip = 0;  // host byte order
  std::optional<std::string> rdp_cookie;
  double deadline = kDefaultDeadlineSeconds;  // relative to arrival

  friend bool operator==(const Request&, const Request&) = default;
};

// Throws kInvalidRequest when the path is not absolute, has an empty
// intermediate segment, or the deadline is not positive.
inline void validate(const Request& request) {
  const std::string_view path = request.path;
  if (path.empty() || path.front() != '/') {
    throw Error(Errc::kInvalidRequest, "path must begin with '/': " + request.path);
  }
  // A trailing '/' is allowed ("/blog/"); "//" anywhere is not.
  if (path.find("//") != std::string_view::npos) {
    throw Error(Errc::kInvalidRequest, "empty path segment: " + request.path);
  }
  if (!(request.deadline > 0.0)) {
    throw Error(Errc::kInvalidRequest, "deadline must be positive");
  }
}

struct ServerId {
  std::uint32_t value = 0;
  friend auto operator<=>(const ServerId&, const ServerId&) = default;
};

struct HardwareProfile {
  std::uint32_t cores = 1;
  double core_speed_ghz = 1.80;
  double ram_gb = 1.0;
  std::string label;

  friend bool operator==(const HardwareProfile&, const HardwareProfile&) = default;
};

struct ServerSpec {
  ServerId id;
  std::string name;
  std::uint32_t weight = 1;
  std::optional<std::uint32_t> maxconn;  // nullopt means unlimited
  HardwareProfile profile;
};

struct ServerState {
  std::uint32_t active_connections = 0;
  double cpu_utilization = 0.0;
  bool up = true;
  std::uint64_t total_dispatched = 0;
};

struct Server {
  ServerSpec spec;
  ServerState state;

  bool has_free_slot() const {
    return !spec.maxconn || state.active_connections < *spec.maxconn;
  }
};

// Position inside a batch weighted round-robin cycle. The weights in force for
// a cycle are copied when it starts, so weight changes land on cycle
// boundaries.
struct WrrCursor {
  bool in_cycle = false;
  std::size_t position = 0;  // index into the pool's server list
  std::uint32_t used = 0;    // selections already granted at `position`
  std::vector<std::uint32_t> cycle_weights;
};

struct PoolCursors {
  WrrCursor roundrobin;
  WrrCursor static_rr;
  std::size_t first = 0;
  std::optional<ServerId> leastconn_last;
};

// Servers in ascending id order together with the per-algorithm state that
// survives between selections.
class BackendPool {
 public:
  BackendPool() = default;

  explicit BackendPool(std::vector<ServerSpec> specs) {
    std::sort(specs.begin(), specs.end(),
              [](const ServerSpec& a, const ServerSpec& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].id.value == 0) {
        throw Error(Errc::kInvalidConfig, "server ids must be positive");
      }
      if (i > 0 && specs[i].id == specs[i - 1].id) {
        throw Error(Errc::kInvalidConfig,
                    "duplicate server id " + std::to_string(specs[i].id.value));
      }
      if (specs[i].weight < 1) {
        throw Error(Errc::kInvalidWeight, "weight must be >= 1");
      }
      if (specs[i].maxconn && *specs[i].maxconn < 1) {
        throw Error(Errc::kInvalidConfig, "maxconn must be >= 1");
      }
      if (specs[i].profile.cores < 1 || !(specs[i].profile.core_speed_ghz > 0.0)) {
        throw Error(Errc::kInvalidConfig, "hardware profile needs cores >= 1 and speed > 0");
      }
    }
    servers_.reserve(specs.size());
    static_weights_.reserve(specs.size());
    for (auto& spec : specs) {
      static_weights_.push_back(spec.weight);
      servers_.push_back(Server{std::move(spec), ServerState{}});
    }
    recompute_sum_weight();
  }

  std::size_t size() const { return servers_.size(); }
  std::span<const Server> servers() const { return servers_; }
  const Server& at(std::size_t index) const { return servers_.at(index); }

  std::optional<std::size_t> index_of(ServerId id) const {
    auto it = std::lower_bound(servers_.begin(), servers_.end(), id,
                               [](const Server& s, ServerId v) { return s.spec.id < v; });
    if (it == servers_.end() || it->spec.id != id) return std::nullopt;
    return static_cast<std::size_t>(it - servers_.begin());
  }

  const Server& server(ServerId id) const { return servers_[require(id)]; }

  std::uint64_t sum_weight() const { return sum_weight_; }

  std::size_t up_count() const {
    return static_cast<std::size_t>(
        std::count_if(servers_.begin(), servers_.end(), [](const Server& s) { return s.state.up; }));
  }

  std::span<const std::uint32_t> static_weights() const { return static_weights_; }

  std::vector<std::uint32_t> live_weights() const {
    std::vector<std::uint32_t> out;
    out.reserve(servers_.size());
    for (const auto& s : servers_) out.push_back(s.spec.weight);
    return out;
  }

  void set_weight(ServerId id, std::uint32_t weight) {
    if (weight < 1) throw Error(Errc::kInvalidWeight, "weight must be >= 1");
    servers_[require(id)].spec.weight = weight;
    recompute_sum_weight();
  }

  // Membership change: the round-robin cursors restart from the lowest id.
  void set_up(ServerId id, bool up) {
    auto& state = servers_[require(id)].state;
    if (state.up == up) return;
    state.up = up;
    recompute_sum_weight();
    cursors_.roundrobin = WrrCursor{};
    cursors_.static_rr = WrrCursor{};
  }

  void set_utilization(ServerId id, double utilization) {
    if (!(utilization >= 0.0 && utilization <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "cpu utilization must lie in [0,1]");
    }
    servers_[require(id)].state.cpu_utilization = utilization;
  }

  void set_utilization_at(std::size_t index, double utilization) {
    servers_[index].state.cpu_utilization = utilization;
  }

  PoolCursors& cursors() { return cursors_; }
  const PoolCursors& cursors() const { return cursors_; }

  void note_dispatch(std::size_t index) {
    auto& state = servers_[index].state;
    ++state.active_connections;
    ++state.total_dispatched;
  }

  void note_release(ServerId id) {
    auto& state = servers_[require(id)].state;
    if (state.active_connections == 0) {
      throw Error(Errc::kUnderflowRelease,
                  "release on server " + std::to_string(id.value) + " with no active connections");
    }
    --state.active_connections;
  }

 private:
  std::size_t require(ServerId id) const {
    auto index = index_of(id);
    if (!index) throw Error(Errc::kUnknownServer, "no server with id " + std::to_string(id.value));
    return *index;
  }

  void recompute_sum_weight() {
    sum_weight_ = 0;
    for (const auto& s : servers_) {
      if (s.state.up) sum_weight_ += s.spec.weight;
    }
  }

  std::vector<Server> servers_;
  std::vector<std::uint32_t> static_weights_;
  std::uint64_t sum_weight_ = 0;
  PoolCursors cursors_;
};

}  // namespace balancelab
