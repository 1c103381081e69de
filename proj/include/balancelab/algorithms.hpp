#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/hashing.hpp"
#include "balancelab/rng.hpp"

namespace balancelab {

enum class Algorithm {
  kRandom,
  kFirst,
  kLeastconn,
  kSource,
  kRoundrobin,
  kStaticRr,
  kUri,
  kHeader,
  kRdpCookie,
  kUrlParam,
  kCpuRandom,
};

inline constexpr std::array kAllAlgorithms = {
    Algorithm::kRandom,   Algorithm::kFirst,    Algorithm::kLeastconn, Algorithm::kSource,
    Algorithm::kRoundrobin, Algorithm::kStaticRr, Algorithm::kUri,     Algorithm::kHeader,
    Algorithm::kRdpCookie, Algorithm::kUrlParam, Algorithm::kCpuRandom,
};

constexpr std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kRandom: return "random";
    case Algorithm::kFirst: return "first";
    case Algorithm::kLeastconn: return "leastconn";
    case Algorithm::kSource: return "source";
    case Algorithm::kRoundrobin: return "roundrobin";
    case Algorithm::kStaticRr: return "static_rr";
    case Algorithm::kUri: return "uri";
    case Algorithm::kHeader: return "header";
    case Algorithm::kRdpCookie: return "rdp_cookie";
    case Algorithm::kUrlParam: return "url_param";
    case Algorithm::kCpuRandom: return "cpu_random";
  }
  return "unknown";
}

// Accepts the canonical names plus HAProxy's spellings (static-rr, rdp-cookie).
inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (Algorithm a : kAllAlgorithms) {
    if (name == to_string(a)) return a;
  }
  if (name == "static-rr") return Algorithm::kStaticRr;
  if (name == "rdp-cookie") return Algorithm::kRdpCookie;
  if (name == "url-param") return Algorithm::kUrlParam;
  if (name == "cpu-random") return Algorithm::kCpuRandom;
  return std::nullopt;
}

struct AlgorithmConfig {
  Algorithm kind = Algorithm::kRoundrobin;
  std::uint32_t power_n = 2;
  bool uri_use_path = true;
  bool uri_use_query = false;
  std::uint32_t uri_depth = 0;  // 0 = whole path
  std::string header_name = "Host";
  std::optional<std::string> param_name;
  double cpu_threshold = 0.5;
  std::uint64_t rng_seed = 1;
};

inline void validate(const AlgorithmConfig& config) {
  if (config.power_n < 1) throw Error(Errc::kInvalidConfig, "power_n must be >= 1");
  if (config.kind == Algorithm::kUri && !config.uri_use_path && !config.uri_use_query) {
    throw Error(Errc::kInvalidConfig, "uri needs uri_use_path or uri_use_query");
  }
  if (config.kind == Algorithm::kHeader && config.header_name.empty()) {
    throw Error(Errc::kInvalidConfig, "header algorithm needs a header name");
  }
  if (config.kind == Algorithm::kCpuRandom &&
      !(config.cpu_threshold > 0.0 && config.cpu_threshold <= 1.0)) {
    throw Error(Errc::kInvalidConfig, "cpu_threshold must lie in (0,1]");
  }
  if (config.kind == Algorithm::kUrlParam && config.param_name && config.param_name->empty()) {
    throw Error(Errc::kInvalidConfig, "param_name must not be empty when set");
  }
}

// Outcome of one selector call: the chosen position in pool.servers().
struct Pick {
  std::size_t index = 0;
  ServerId id;
  bool fallback_used = false;
};

namespace detail {

inline Pick pick_at(const BackendPool& pool, std::size_t index, bool fallback = false) {
  return Pick{index, pool.at(index).spec.id, fallback};
}

inline void require_up(const BackendPool& pool) {
  if (pool.up_count() == 0) throw Error(Errc::kEmptyPool, "no up servers");
}

inline std::optional<std::size_t> next_weighted(std::span<const std::uint32_t> weights,
                                                std::size_t from) {
  for (std::size_t i = from; i < weights.size(); ++i) {
    if (weights[i] > 0) return i;
  }
  return std::nullopt;
}

// Batch weighted round-robin: each up server receives `weight` consecutive
// selections in id order; a cycle lasts sum-of-weights selections.
inline std::size_t advance_batch_wrr(const BackendPool& pool, WrrCursor& cursor,
                                     bool use_static_weights) {
  const auto servers = pool.servers();
  if (cursor.in_cycle && (cursor.position >= servers.size() || !servers[cursor.position].state.up)) {
    cursor = WrrCursor{};
  }
  if (!cursor.in_cycle) {
    cursor.cycle_weights.assign(servers.size(), 0);
    for (std::size_t i = 0; i < servers.size(); ++i) {
      if (!servers[i].state.up) continue;
      cursor.cycle_weights[i] =
          use_static_weights ? pool.static_weights()[i] : servers[i].spec.weight;
    }
    auto start = next_weighted(cursor.cycle_weights, 0);
    if (!start) throw Error(Errc::kEmptyPool, "no up servers");
    cursor.in_cycle = true;
    cursor.position = *start;
    cursor.used = 0;
  }
  const std::size_t chosen = cursor.position;
  if (++cursor.used >= cursor.cycle_weights[chosen]) {
    cursor.used = 0;
    auto next = next_weighted(cursor.cycle_weights, chosen + 1);
    if (next) {
      cursor.position = *next;
    } else {
      cursor.in_cycle = false;
    }
  }
  return chosen;
}

// Draws min(n, candidates) distinct candidates uniformly (partial
// Fisher-Yates) and keeps the one with the fewest active connections, lowest
// id on ties. `candidates` is reordered.
inline std::size_t power_of_n(const BackendPool& pool, std::vector<std::size_t>& candidates,
                              std::uint32_t n, Rng& rng) {
  const std::size_t draws = std::min<std::size_t>(n, candidates.size());
  std::size_t best = 0;
  bool have_best = false;
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    const std::size_t c = candidates[i];
    if (!have_best) {
      best = c;
      have_best = true;
      continue;
    }
    const auto& cand = pool.at(c);
    const auto& incumbent = pool.at(best);
    if (cand.state.active_connections < incumbent.state.active_connections ||
        (cand.state.active_connections == incumbent.state.active_connections &&
         cand.spec.id < incumbent.spec.id)) {
      best = c;
    }
  }
  return best;
}

inline std::vector<std::size_t> up_indices(const BackendPool& pool) {
  std::vector<std::size_t> out;
  const auto servers = pool.servers();
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (servers[i].state.up) out.push_back(i);
  }
  return out;
}

}  // namespace detail

inline Pick select_roundrobin(BackendPool& pool) {
  detail::require_up(pool);
  return detail::pick_at(pool, detail::advance_batch_wrr(pool, pool.cursors().roundrobin, false));
}

// Same batch cycle as roundrobin, driven by the weights captured when the pool
// was built.
inline Pick select_static_rr(BackendPool& pool) {
  detail::require_up(pool);
  return detail::pick_at(pool, detail::advance_batch_wrr(pool, pool.cursors().static_rr, true));
}

inline Pick select_random(const BackendPool& pool, std::uint32_t power_n, Rng& rng) {
  detail::require_up(pool);
  auto candidates = detail::up_indices(pool);
  return detail::pick_at(pool, detail::power_of_n(pool, candidates, power_n, rng));
}

// Sticky first-fit: stay on the server under the cursor while it has a free
// slot, otherwise walk forward in id order (wrapping once) to the next one.
inline Pick select_first(BackendPool& pool) {
  detail::require_up(pool);
  const auto servers = pool.servers();
  auto& cursor = pool.cursors().first;
  const std::size_t n = servers.size();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = (cursor + step) % n;
    if (servers[i].state.up && servers[i].has_free_slot()) {
      cursor = i;
      return detail::pick_at(pool, i);
    }
  }
  throw Error(Errc::kAllServersFull, "every up server is at maxconn");
}

// Global minimum of active connections; ties rotate through the tied ids
// starting after the previously chosen tie-break winner.
inline Pick select_leastconn(BackendPool& pool) {
  detail::require_up(pool);
  const auto servers = pool.servers();
  std::uint32_t least = UINT32_MAX;
  for (const auto& s : servers) {
    if (s.state.up) least = std::min(least, s.state.active_connections);
  }
  auto& last = pool.cursors().leastconn_last;
  std::optional<std::size_t> lowest_tied;
  std::optional<std::size_t> after_last;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    const auto& s = servers[i];
    if (!s.state.up || s.state.active_connections != least) continue;
    if (!lowest_tied) lowest_tied = i;
    if (!after_last && (!last || s.spec.id > *last)) after_last = i;
  }
  const std::size_t chosen = after_last ? *after_last : *lowest_tied;
  last = servers[chosen].spec.id;
  return detail::pick_at(pool, chosen);
}

inline std::string source_key(std::uint32_t client_ip) {
  std::string key(4, '\0');
  key[0] = static_cast<char>((client_ip >> 24) & 0xff);
  key[1] = static_cast<char>((client_ip >> 16) & 0xff);
  key[2] = static_cast<char>((client_ip >> 8) & 0xff);
  key[3] = static_cast<char>(client_ip & 0xff);
  return key;
}

inline Pick select_source(const BackendPool& pool, const Request& request) {
  detail::require_up(pool);
  return detail::pick_at(pool, map_hash_to_index(stable_hash(source_key(request.client_ip)), pool));
}

// First `depth` directory components of `path` ("/a/b/c", 1 -> "/a"); depth 0
// keeps the whole path.
inline std::string_view truncate_path(std::string_view path, std::uint32_t depth) {
  if (depth == 0) return path;
  std::size_t pos = 0;
  for (std::uint32_t seen = 0; seen < depth; ++seen) {
    pos = path.find('/', pos + 1);
    if (pos == std::string_view::npos) return path;
  }
  return path.substr(0, pos);
}

inline std::string uri_key(const Request& request, const AlgorithmConfig& config) {
  std::string key;
  if (config.uri_use_path) key.append(truncate_path(request.path, config.uri_depth));
  if (config.uri_use_query && request.query) {
    key.push_back('?');
    key.append(*request.query);
  }
  return key;
}

inline Pick select_uri(const BackendPool& pool, const Request& request,
                       const AlgorithmConfig& config) {
  if (!config.uri_use_path && !config.uri_use_query) {
    throw Error(Errc::kInvalidConfig, "uri needs uri_use_path or uri_use_query");
  }
  detail::require_up(pool);
  return detail::pick_at(pool, map_hash_to_index(stable_hash(uri_key(request, config)), pool));
}

inline Pick select_header(BackendPool& pool, const Request& request,
                          std::string_view header_name) {
  detail::require_up(pool);
  if (const std::string* value = request.headers.find(header_name)) {
    return detail::pick_at(pool, map_hash_to_index(stable_hash(*value), pool));
  }
  Pick pick = select_roundrobin(pool);
  pick.fallback_used = true;
  return pick;
}

inline Pick select_rdp_cookie(BackendPool& pool, const Request& request) {
  detail::require_up(pool);
  if (request.rdp_cookie) {
    return detail::pick_at(pool, map_hash_to_index(stable_hash(*request.rdp_cookie), pool));
  }
  Pick pick = select_roundrobin(pool);
  pick.fallback_used = true;
  return pick;
}

// Value of `name` in an '&'-separated k=v query, raw bytes, first occurrence.
// A bare key ("flag") yields an empty value.
inline std::optional<std::string_view> query_param(std::string_view query, std::string_view name) {
  while (!query.empty()) {
    const std::size_t amp = query.find('&');
    const std::string_view pair = query.substr(0, amp);
    const std::size_t eq = pair.find('=');
    const std::string_view key = pair.substr(0, eq);
    if (key == name) {
      return eq == std::string_view::npos ? std::string_view{} : pair.substr(eq + 1);
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return std::nullopt;
}

inline Pick select_url_param(BackendPool& pool, const Request& request,
                             const std::optional<std::string>& param_name) {
  detail::require_up(pool);
  if (request.query && !request.query->empty()) {
    std::optional<std::string_view> key;
    if (param_name) {
      key = query_param(*request.query, *param_name);
    } else {
      key = *request.query;
    }
    if (key) return detail::pick_at(pool, map_hash_to_index(stable_hash(*key), pool));
  }
  Pick pick = select_roundrobin(pool);
  pick.fallback_used = true;
  return pick;
}

// Random restricted to servers whose utilization is below `threshold`; when
// none qualify, plain random over every up server with the fallback flag set.
inline Pick select_cpu_random(const BackendPool& pool, double threshold, std::uint32_t power_n,
                              Rng& rng) {
  detail::require_up(pool);
  std::vector<std::size_t> candidates;
  const auto servers = pool.servers();
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (servers[i].state.up && servers[i].state.cpu_utilization < threshold) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) {
    Pick pick = select_random(pool, power_n, rng);
    pick.fallback_used = true;
    return pick;
  }
  return detail::pick_at(pool, detail::power_of_n(pool, candidates, power_n, rng));
}

// Runs the configured selector. Throws kEmptyPool / kAllServersFull when no
// server can take the request.
inline Pick select(BackendPool& pool, const Request& request, const AlgorithmConfig& config,
                   Rng& rng) {
  switch (config.kind) {
    case Algorithm::kRandom: return select_random(pool, config.power_n, rng);
    case Algorithm::kFirst: return select_first(pool);
    case Algorithm::kLeastconn: return select_leastconn(pool);
    case Algorithm::kSource: return select_source(pool, request);
    case Algorithm::kRoundrobin: return select_roundrobin(pool);
    case Algorithm::kStaticRr: return select_static_rr(pool);
    case Algorithm::kUri: return select_uri(pool, request, config);
    case Algorithm::kHeader: return select_header(pool, request, config.header_name);
    case Algorithm::kRdpCookie: return select_rdp_cookie(pool, request);
    case Algorithm::kUrlParam: return select_url_param(pool, request, config.param_name);
    case Algorithm::kCpuRandom:
      return select_cpu_random(pool, config.cpu_threshold, config.power_n, rng);
  }
  throw Error(Errc::kInvalidConfig, "unknown algorithm");
}

}  // namespace balancelab
