#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/rng.hpp"

namespace balancelab {

struct CatalogEntry {
  std::string path;
  std::optional<std::string> query;

  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct PageCatalog {
  std::vector<CatalogEntry> get_paths;
  std::vector<CatalogEntry> post_paths;
  std::vector<std::uint32_t> client_ip_pool;
  std::vector<std::string> hosts;
  std::vector<std::string> user_agents;
};

// Splits "/path?query" into its parts; a trailing '?' leaves an empty query.
inline CatalogEntry parse_target(std::string_view target) {
  const std::size_t q = target.find('?');
  if (q == std::string_view::npos) return CatalogEntry{std::string(target), std::nullopt};
  return CatalogEntry{std::string(target.substr(0, q)), std::string(target.substr(q + 1))};
}

inline std::vector<std::uint32_t> synthetic_client_ips(std::size_t count) {
  std::vector<std::uint32_t> ips;
  ips.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    ips.push_back((10u << 24) | static_cast<std::uint32_t>(i));  // 10.0.x.y
  }
  return ips;
}

// Blog + shop site. Reads and writes live under separate path families; with
// the uri algorithm on five equal-weight servers the POST endpoints all hash to
// server 5 and every GET page to servers 1-4.
inline PageCatalog default_catalog() {
  PageCatalog catalog;
  for (std::string_view target : {
           "/",
           "/blog/latest/",
           "/blog/hello-world/",
           "/blog/scaling-web-tiers/",
           "/blog/page/2/",
           "/blog/page/3/",
           "/blog/category/news/",
           "/blog/category/engineering/",
           "/blog/tag/performance/",
           "/blog/archive/2021/",
           "/shop/",
           "/shop/category/shirts/",
           "/shop/category/mugs/",
           "/shop/product/logo-tee/",
           "/shop/product/travel-mug/",
           "/shop/product/sticker-pack/",
           "/shop/cart/",
           "/about/",
           "/contact/",
           "/search/?s=load",
       }) {
    catalog.get_paths.push_back(parse_target(target));
  }
  for (std::string_view target : {
           "/wp-comments-post.php",
           "/shop/cart/add",
           "/shop/checkout/submit",
       }) {
    catalog.post_paths.push_back(parse_target(target));
  }
  catalog.client_ip_pool = synthetic_client_ips(1024);
  catalog.hosts = {"blog.example.com", "shop.example.com"};
  catalog.user_agents = {"Mozilla/5.0 (X11; Linux x86_64)", "Mozilla/5.0 (Windows NT 10.0)",
                         "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_0)"};
  return catalog;
}

// Plain-text catalog: one entry per line, `GET <path>[?query]` or
// `POST <path>`. Blank lines and lines starting with '#' are skipped. Client
// IPs and header values keep the synthetic defaults.
inline PageCatalog parse_catalog(std::istream& in) {
  PageCatalog catalog = default_catalog();
  catalog.get_paths.clear();
  catalog.post_paths.clear();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string method_text;
    std::string target;
    if (!(fields >> method_text) || method_text.front() == '#') continue;
    const auto method = parse_method(method_text);
    std::string extra;
    if (!method || !(fields >> target) || target.front() != '/' || (fields >> extra)) {
      throw Error(Errc::kParseError, "catalog line " + std::to_string(line_no) + ": " + line);
    }
    auto entry = parse_target(target);
    (*method == Method::kGet ? catalog.get_paths : catalog.post_paths).push_back(std::move(entry));
  }
  return catalog;
}

inline PageCatalog load_catalog(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::kIoError, "cannot open catalog " + file);
  return parse_catalog(in);
}

enum class ArrivalProcess { kUniformRate, kPoisson };

struct Scenario {
  std::uint64_t total_requests = 1000;
  double period_s = 60.0;
  double get_fraction = 0.5;
  ArrivalProcess arrival = ArrivalProcess::kUniformRate;
  std::uint64_t seed = 1;
  double deadline_s = kDefaultDeadlineSeconds;
  PageCatalog catalog = default_catalog();

  double rate() const { return static_cast<double>(total_requests) / period_s; }

  std::uint64_t get_count() const {
    return static_cast<std::uint64_t>(std::llround(get_fraction * static_cast<double>(total_requests)));
  }
};

inline void validate(const Scenario& s) {
  if (s.total_requests < 1) throw Error(Errc::kInvalidConfig, "total_requests must be >= 1");
  if (!(s.period_s > 0.0)) throw Error(Errc::kInvalidConfig, "period must be positive");
  if (!(s.get_fraction >= 0.0 && s.get_fraction <= 1.0)) {
    throw Error(Errc::kInvalidConfig, "get_fraction must lie in [0,1]");
  }
  if (!(s.deadline_s > 0.0)) throw Error(Errc::kInvalidConfig, "deadline must be positive");
  const std::uint64_t gets = s.get_count();
  if (gets > 0 && s.catalog.get_paths.empty()) {
    throw Error(Errc::kEmptyCatalog, "scenario has GET requests but the catalog has no GET entries");
  }
  if (gets < s.total_requests && s.catalog.post_paths.empty()) {
    throw Error(Errc::kEmptyCatalog, "scenario has POST requests but the catalog has no POST entries");
  }
  if (s.catalog.client_ip_pool.empty()) throw Error(Errc::kEmptyCatalog, "no client IPs");
}

// Deterministic request stream: exactly total_requests requests with arrival
// times in [0, period). The GET/POST split is exact; which positions carry
// which type is a seeded permutation. Content is drawn from the catalog.
inline std::vector<Request> generate(const Scenario& scenario) {
  validate(scenario);
  Rng rng(scenario.seed);
  const std::uint64_t n = scenario.total_requests;

  std::vector<Method> types(n, Method::kPost);
  std::fill_n(types.begin(), scenario.get_count(), Method::kGet);
  for (std::uint64_t i = n; i > 1; --i) {
    std::swap(types[i - 1], types[rng.below(i)]);
  }

  std::vector<double> arrivals(n);
  if (scenario.arrival == ArrivalProcess::kUniformRate) {
    for (std::uint64_t i = 0; i < n; ++i) {
      arrivals[i] = scenario.period_s * static_cast<double>(i) / static_cast<double>(n);
    }
  } else {
    // n arrivals of a Poisson process conditioned on the window: normalized
    // partial sums of n + 1 exponential gaps.
    std::vector<double> sums(n + 1);
    double total = 0.0;
    for (std::uint64_t i = 0; i <= n; ++i) {
      total += -std::log1p(-rng.unit());
      sums[i] = total;
    }
    for (std::uint64_t i = 0; i < n; ++i) {
      arrivals[i] = std::min(scenario.period_s * sums[i] / total,
                             std::nextafter(scenario.period_s, 0.0));
    }
  }

  const auto& catalog = scenario.catalog;
  std::vector<Request> requests;
  requests.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Request r;
    r.request_id = i;
    r.arrival_time = arrivals[i];
    r.method = types[i];
    const auto& entries = r.method == Method::kGet ? catalog.get_paths : catalog.post_paths;
    const CatalogEntry& entry = entries[rng.below(entries.size())];
    r.path = entry.path;
    r.query = entry.query;
    const std::size_t client = rng.below(catalog.client_ip_pool.size());
    r.client_ip = catalog.client_ip_pool[client];
    if (!catalog.hosts.empty()) r.headers.add("Host", catalog.hosts[rng.below(catalog.hosts.size())]);
    if (!catalog.user_agents.empty()) {
      r.headers.add("User-Agent", catalog.user_agents[rng.below(catalog.user_agents.size())]);
    }
    r.rdp_cookie = "user-" + std::to_string(client);
    r.deadline = scenario.deadline_s;
    requests.push_back(std::move(r));
  }
  return requests;
}

// The 1000-request scenario followed by step, 2*step, ... up to max_total, all
// sharing `base`'s period, mix and seed.
inline std::vector<Scenario> scenario_suite(std::uint64_t max_total = 40000,
                                            std::int64_t step = 5000, const Scenario& base = {}) {
  if (step <= 0) throw Error(Errc::kInvalidStep, "step must be positive");
  std::vector<Scenario> out;
  Scenario first = base;
  first.total_requests = 1000;
  out.push_back(first);
  for (std::uint64_t total = static_cast<std::uint64_t>(step); total <= max_total;
       total += static_cast<std::uint64_t>(step)) {
    if (total == 1000) continue;
    Scenario s = base;
    s.total_requests = total;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace balancelab
