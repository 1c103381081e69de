#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "balancelab/algorithms.hpp"
#include "balancelab/error.hpp"
#include "balancelab/harness.hpp"
#include "balancelab/health.hpp"
#include "balancelab/loadgen.hpp"
#include "balancelab/proxy.hpp"
#include "balancelab/simcluster.hpp"
#include "balancelab/workload.hpp"

// INI-style configuration shared by every CLI mode:
//
//   [simulation]        run matrix and scenario suite
//   [service]           service-cost model
//   [algorithm]         AlgorithmConfig knobs for every algorithm in the run
//   [environment.NAME]  custom environment: servers = cores:ghz:ram[:weight], ...
//   [proxy]             listen address, backends and health checks
//   [sweep]             worker-count sweep
namespace balancelab {

enum class SweepMode { kSimulator, kProxy };

struct SweepConfig {
  std::vector<std::uint32_t> counts = default_worker_counts();
  SweepMode mode = SweepMode::kSimulator;
  ProxySweepOptions proxy;
  std::uint64_t total_requests = 20000;
  std::string environment = "homogeneous";
};

struct Config {
  RunMatrix matrix;
  std::vector<EnvironmentProfile> known_environments = {homogeneous_environment(),
                                                        heterogeneous_environment()};
  Scenario base_scenario;  // template for every scenario in the suite
  std::uint64_t max_total = 80000;
  std::int64_t step = 5000;
  std::string out_dir = "out";
  bool svg = true;
  ProxyConfig proxy;
  SweepConfig sweep;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split_list(std::string_view text, char sep = ',') {
  std::vector<std::string> out;
  while (true) {
    const std::size_t at = text.find(sep);
    std::string item = trim_copy(text.substr(0, at));
    if (!item.empty()) out.push_back(std::move(item));
    if (at == std::string_view::npos) break;
    text.remove_prefix(at + 1);
  }
  return out;
}

template <typename T>
T parse_value(std::string_view key, const std::string& text) {
  auto fail = [&]() -> T {
    throw Error(Errc::kInvalidConfig, "bad value for " + std::string(key) + ": '" + text + "'");
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
    if (text == "false" || text == "no" || text == "off" || text == "0") return false;
    return fail();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    T value{};
    const char* end = text.data() + text.size();
    if constexpr (std::is_unsigned_v<T>) {
      if (!text.empty() && text.front() == '-') return fail();
    }
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) return fail();
    return value;
  }
}

// One INI section with typo detection: every key must be consumed.
class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)) {
    if (tree == nullptr) return;
    for (const auto& [key, child] : *tree) values_[key] = trim_copy(child.data());
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    target = parse_value<T>(name_ + "." + key, it->second);
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& target) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    target = parse_value<T>(name_ + "." + key, it->second);
  }

  std::optional<std::string> raw(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  // Keys starting with `prefix`, prefix stripped, sorted by name.
  std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& prefix) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, value] : values_) {
      if (key.rfind(prefix, 0) == 0) {
        used_.insert(key);
        out.emplace_back(key.substr(prefix.size()), value);
      }
    }
    return out;
  }

  void check_unused() const {
    for (const auto& [key, value] : values_) {
      if (!used_.count(key)) throw Error(Errc::kInvalidConfig, "unknown key " + name_ + "." + key);
    }
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

inline Algorithm algorithm_named(const std::string& name) {
  const auto a = parse_algorithm(name);
  if (!a) throw Error(Errc::kInvalidConfig, "unknown algorithm '" + name + "'");
  return *a;
}

inline void read_algorithm(Section& s, AlgorithmConfig& a) {
  if (auto kind = s.raw("kind")) a.kind = algorithm_named(*kind);
  s.read("power_n", a.power_n);
  s.read("uri_use_path", a.uri_use_path);
  s.read("uri_use_query", a.uri_use_query);
  s.read("uri_depth", a.uri_depth);
  s.read("header_name", a.header_name);
  s.read("param_name", a.param_name);
  s.read("cpu_threshold", a.cpu_threshold);
  s.read("rng_seed", a.rng_seed);
}

// "16:1.8:32[:weight]"
inline void read_servers(const std::string& section, const std::string& text, EnvironmentProfile& env) {
  for (const std::string& item : split_list(text)) {
    const auto parts = split_list(item, ':');
    if (parts.size() < 3 || parts.size() > 4) {
      throw Error(Errc::kInvalidConfig, section + ".servers: expected cores:ghz:ram[:weight], got '" + item + "'");
    }
    HardwareProfile hw;
    hw.cores = parse_value<std::uint32_t>(section + ".servers", parts[0]);
    hw.core_speed_ghz = parse_value<double>(section + ".servers", parts[1]);
    hw.ram_gb = parse_value<double>(section + ".servers", parts[2]);
    hw.label = item;
    env.servers.push_back(hw);
    env.weights.push_back(parts.size() == 4 ? parse_value<std::uint32_t>(section + ".servers", parts[3]) : 1);
  }
}

// "host:port [weight=N] [maxconn=N]"
inline BackendAddress read_backend(const std::string& name, const std::string& text) {
  std::istringstream in(text);
  std::string address;
  in >> address;
  BackendAddress b;
  b.name = name;
  std::tie(b.host, b.port) = split_host_port(address);
  std::string option;
  while (in >> option) {
    const std::size_t eq = option.find('=');
    const std::string key = option.substr(0, eq);
    const std::string value = eq == std::string::npos ? "" : option.substr(eq + 1);
    if (key == "weight") {
      b.weight = parse_value<std::uint32_t>("proxy.server." + name + ".weight", value);
    } else if (key == "maxconn") {
      b.maxconn = parse_value<std::uint32_t>("proxy.server." + name + ".maxconn", value);
    } else {
      throw Error(Errc::kInvalidConfig, "unknown backend option '" + option + "' for " + name);
    }
  }
  return b;
}

}  // namespace detail

// Parses and validates a configuration. Missing sections keep their defaults.
// Relative file names (catalog) resolve against `base_dir`. Throws
// Error(kInvalidConfig) on unknown keys or bad values.
inline Config parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::kInvalidConfig, e.what());
  }
  std::set<std::string> known = {"simulation", "service", "algorithm", "proxy", "sweep"};
  auto section = [&](const std::string& name) {
    auto it = tree.find(name);
    return detail::Section(name, it == tree.not_found() ? nullptr : &it->second);
  };

  Config config;
  RunMatrix& m = config.matrix;

  detail::Section sim = section("simulation");
  std::uint64_t& max_total = config.max_total;
  std::int64_t& step = config.step;
  Scenario& base = config.base_scenario;
  sim.read("max_total", max_total);
  sim.read("step", step);
  sim.read("period_s", base.period_s);
  sim.read("get_fraction", base.get_fraction);
  sim.read("deadline_s", base.deadline_s);
  if (auto arrival = sim.raw("arrival")) {
    if (*arrival == "uniform" || *arrival == "uniform_rate") {
      base.arrival = ArrivalProcess::kUniformRate;
    } else if (*arrival == "poisson") {
      base.arrival = ArrivalProcess::kPoisson;
    } else {
      throw Error(Errc::kInvalidConfig, "simulation.arrival must be uniform or poisson");
    }
  }
  if (auto catalog = sim.raw("catalog")) {
    std::filesystem::path file(*catalog);
    if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
    base.catalog = load_catalog(file.string());
  }
  sim.read("base_seed", m.base_seed);
  sim.read("repetitions", m.repetitions);
  sim.read("threads", m.threads);
  sim.read("first_maxconn_per_core", m.first_maxconn_per_core);
  sim.read("out", config.out_dir);
  sim.read("svg", config.svg);
  std::vector<std::string> algorithm_names;
  if (auto list = sim.raw("algorithms")) algorithm_names = detail::split_list(*list);
  std::vector<std::string> environment_names;
  if (auto list = sim.raw("environments")) environment_names = detail::split_list(*list);
  sim.check_unused();
  m.scenarios = scenario_suite(max_total, step, base);

  detail::Section service = section("service");
  service.read("base_cost_get", m.service.base_cost_get);
  service.read("base_cost_post", m.service.base_cost_post);
  service.read("reference_speed_ghz", m.service.reference_speed_ghz);
  service.read("network_latency_s", m.service.network_latency_s);
  service.check_unused();
  validate(m.service);

  AlgorithmConfig algorithm;
  detail::Section algo = section("algorithm");
  detail::read_algorithm(algo, algorithm);
  algo.check_unused();
  validate(algorithm);
  if (!algorithm_names.empty()) {
    m.algorithms.clear();
    for (const auto& name : algorithm_names) {
      AlgorithmConfig a = algorithm;
      a.kind = detail::algorithm_named(name);
      m.algorithms.push_back(a);
    }
  } else {
    for (auto& a : m.algorithms) {
      const Algorithm kind = a.kind;
      a = algorithm;
      a.kind = kind;
    }
  }

  for (const auto& [name, child] : tree) {
    if (name.rfind("environment.", 0) != 0) continue;
    known.insert(name);
    detail::Section env_section(name, &child);
    EnvironmentProfile env;
    env.name = name.substr(std::string("environment.").size());
    if (env.name.empty()) throw Error(Errc::kInvalidConfig, "environment section needs a name");
    auto servers = env_section.raw("servers");
    if (!servers) throw Error(Errc::kInvalidConfig, name + " needs a servers key");
    detail::read_servers(name, *servers, env);
    env_section.check_unused();
    make_pool(env);  // validates
    std::erase_if(config.known_environments, [&](const auto& e) { return e.name == env.name; });
    config.known_environments.push_back(std::move(env));
  }
  if (!environment_names.empty()) {
    m.environments.clear();
    for (const auto& name : environment_names) {
      auto it = std::find_if(config.known_environments.begin(), config.known_environments.end(),
                             [&](const auto& e) { return e.name == name; });
      if (it == config.known_environments.end()) {
        throw Error(Errc::kInvalidConfig, "unknown environment '" + name + "'");
      }
      m.environments.push_back(*it);
    }
  }

  ProxyConfig& p = config.proxy;
  p.balance = algorithm;
  detail::Section proxy = section("proxy");
  if (auto listen = proxy.raw("listen")) std::tie(p.listen_host, p.listen_port) = split_host_port(*listen);
  proxy.read("maxconn", p.maxconn);
  proxy.read("workers", p.workers);
  if (auto balance = proxy.raw("balance")) p.balance.kind = detail::algorithm_named(*balance);
  proxy.read("health_checks", p.health_checks);
  proxy.read("health_interval_s", p.health.interval_s);
  proxy.read("spread_checks_pct", p.health.spread_checks_pct);
  proxy.read("rise", p.health.rise);
  proxy.read("fall", p.health.fall);
  proxy.read("health_timeout_s", p.health.timeout_s);
  proxy.read("backend_timeout_s", p.backend_timeout_s);
  std::optional<std::string> access_log;
  proxy.read("access_log", access_log);
  const auto backends = proxy.with_prefix("server.");
  for (const auto& [name, text] : backends) p.servers.push_back(detail::read_backend(name, text));
  proxy.check_unused();
  validate(p.health);
  if (access_log && *access_log != "off") {
    if (*access_log == "stdout" || *access_log == "-") {
      p.access_log = [](std::string_view line) {
        std::fwrite(line.data(), 1, line.size(), stdout);
        std::fputc('\n', stdout);
        std::fflush(stdout);
      };
    } else {
      auto file = std::make_shared<std::ofstream>(*access_log, std::ios::app);
      if (!*file) throw Error(Errc::kInvalidConfig, "cannot open access log " + *access_log);
      p.access_log = [file](std::string_view line) {
        *file << line << '\n';
        file->flush();
      };
    }
  }

  SweepConfig& sw = config.sweep;
  sw.proxy.balance = algorithm;
  detail::Section sweep = section("sweep");
  if (auto counts = sweep.raw("counts")) {
    sw.counts.clear();
    for (const auto& c : detail::split_list(*counts)) {
      sw.counts.push_back(detail::parse_value<std::uint32_t>("sweep.counts", c));
    }
  }
  if (auto mode = sweep.raw("mode")) {
    if (*mode == "sim" || *mode == "simulator") {
      sw.mode = SweepMode::kSimulator;
    } else if (*mode == "proxy") {
      sw.mode = SweepMode::kProxy;
    } else {
      throw Error(Errc::kInvalidConfig, "sweep.mode must be sim or proxy");
    }
  }
  if (auto kind = sweep.raw("algorithm")) sw.proxy.balance.kind = detail::algorithm_named(*kind);
  sweep.read("total_requests", sw.total_requests);
  sweep.read("environment", sw.environment);
  sweep.read("rate", sw.proxy.rate);
  sweep.read("duration_s", sw.proxy.duration_s);
  sweep.read("backends", sw.proxy.backends);
  sweep.read("clients", sw.proxy.clients);
  double delay_ms = 5.0;
  sweep.read("backend_delay_ms", delay_ms);
  if (delay_ms < 0) throw Error(Errc::kInvalidConfig, "sweep.backend_delay_ms must be >= 0");
  sw.proxy.backend_delay = std::chrono::microseconds(std::llround(delay_ms * 1000.0));
  sw.proxy.seed = m.base_seed;
  sweep.check_unused();
  validate_worker_counts(sw.counts);

  for (const auto& [name, child] : tree) {
    if (!known.count(name)) throw Error(Errc::kInvalidConfig, "unknown section [" + name + "]");
  }
  return config;
}

inline Config load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::kInvalidConfig, "cannot open config " + file);
  return parse_config(in, std::filesystem::path(file).parent_path());
}

}  // namespace balancelab
