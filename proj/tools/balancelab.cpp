// balancelab command-line front end: simulation matrix, worker sweep, live
// proxy and a loopback echo backend.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "balancelab/balancelab.hpp"

namespace bl = balancelab;

namespace {

constexpr int kConfigError = 2;

bl::Config load_or_default(const std::string& file) {
  return file.empty() ? bl::Config{} : bl::load_config(file);
}

// Blocks SIGINT/SIGTERM in every thread created afterwards and waits for one.
class SignalWaiter {
 public:
  SignalWaiter() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
  }
  int wait() {
    int sig = 0;
    sigwait(&set_, &sig);
    return sig;
  }

 private:
  sigset_t set_;
};

int run_sim(const std::string& config_file, const std::string& algos, const std::string& env,
            std::optional<std::uint64_t> max_total, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
  bl::Config config = load_or_default(config_file);
  bl::RunMatrix& m = config.matrix;
  if (!algos.empty()) {
    bl::AlgorithmConfig tuned = m.algorithms.front();
    m.algorithms.clear();
    for (const auto& name : bl::detail::split_list(algos)) {
      bl::AlgorithmConfig a = tuned;
      a.kind = bl::detail::algorithm_named(name);
      m.algorithms.push_back(a);
    }
  }
  if (!env.empty()) {
    m.environments.clear();
    for (const auto& name : bl::detail::split_list(env)) {
      auto it = std::find_if(config.known_environments.begin(), config.known_environments.end(),
                             [&](const auto& e) { return e.name == name; });
      if (it == config.known_environments.end()) {
        throw bl::Error(bl::Errc::kInvalidConfig, "unknown environment '" + name + "'");
      }
      m.environments.push_back(*it);
    }
  }
  if (max_total) {
    m.scenarios = bl::scenario_suite(*max_total, config.step, config.base_scenario);
  }
  if (seed) m.base_seed = *seed;
  if (!out_dir.empty()) config.out_dir = out_dir;

  const bl::MatrixResult result = bl::run_matrix(m);
  for (const auto& e : result.errors) {
    std::cerr << "cell " << e.environment << "/" << e.algorithm << "/" << e.total_requests
              << " failed: " << e.message << "\n";
  }
  bl::EmitOptions options;
  options.svg = config.svg;
  options.deadline_s = config.base_scenario.deadline_s;
  for (const auto& file : bl::emit(result.rows, config.out_dir, options)) {
    std::cout << file.string() << "\n";
  }
  return 0;
}

int run_sweep(const std::string& config_file, const std::string& counts, const std::string& mode,
              const std::string& out_dir) {
  bl::Config config = load_or_default(config_file);
  bl::SweepConfig& sw = config.sweep;
  if (!counts.empty()) {
    sw.counts.clear();
    for (const auto& c : bl::detail::split_list(counts)) {
      sw.counts.push_back(bl::detail::parse_value<std::uint32_t>("--counts", c));
    }
  }
  if (mode == "proxy") sw.mode = bl::SweepMode::kProxy;
  if (mode == "sim") sw.mode = bl::SweepMode::kSimulator;
  bl::validate_worker_counts(sw.counts);

  std::vector<bl::SummaryRow> rows;
  if (sw.mode == bl::SweepMode::kProxy) {
    rows = bl::worker_sweep_proxy(sw.counts, sw.proxy);
  } else {
    auto it = std::find_if(config.known_environments.begin(), config.known_environments.end(),
                           [&](const auto& e) { return e.name == sw.environment; });
    if (it == config.known_environments.end()) {
      throw bl::Error(bl::Errc::kInvalidConfig, "unknown environment '" + sw.environment + "'");
    }
    bl::Scenario scenario = config.base_scenario;
    scenario.total_requests = sw.total_requests;
    scenario.seed = config.matrix.base_seed;
    bl::AlgorithmConfig algorithm = sw.proxy.balance;
    algorithm.rng_seed = config.matrix.base_seed;
    rows = bl::worker_sweep_sim(sw.counts, scenario, *it, algorithm, config.matrix.service);
  }
  bl::EmitOptions options;
  options.stem = "workers";
  options.svg = config.svg;
  for (const auto& file : bl::emit(rows, out_dir.empty() ? config.out_dir : out_dir, options)) {
    std::cout << file.string() << "\n";
  }
  return 0;
}

int run_proxy(const std::string& config_file, const std::string& listen) {
  bl::Config config = load_or_default(config_file);
  if (!listen.empty()) {
    std::tie(config.proxy.listen_host, config.proxy.listen_port) = bl::split_host_port(listen);
  }
  bl::validate(config.proxy);
  SignalWaiter signals;
  bl::Proxy proxy(config.proxy);
  proxy.start();
  std::cerr << "balancelab proxy listening on " << config.proxy.listen_host << ":" << proxy.port()
            << " with " << proxy.worker_count() << " workers\n";
  const int sig = signals.wait();
  std::cerr << "signal " << sig << ", draining\n";
  proxy.stop();
  const auto stats = proxy.stats();
  std::cerr << "accepted " << stats.accepted << ", completed " << stats.completed << "\n";
  return 0;
}

int run_backend(const std::string& name, const std::string& listen, double delay_ms,
                std::optional<double> utilization) {
  auto [host, port] = bl::split_host_port(listen);
  SignalWaiter signals;
  bl::EchoBackend backend(name, std::chrono::microseconds(std::llround(delay_ms * 1000.0)), host, port);
  if (utilization) backend.set_utilization(*utilization);
  backend.start();
  std::cerr << "echo backend " << name << " on " << host << ":" << backend.port() << "\n";
  signals.wait();
  backend.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balancelab: load-balancing algorithm simulator and reverse proxy"};
  app.require_subcommand(1);

  std::string config_file;
  std::string algos, env, out_dir;
  std::optional<std::uint64_t> max_total, seed;
  auto* sim = app.add_subcommand("sim", "run the algorithm x scenario x environment matrix");
  sim->add_option("--config", config_file, "configuration file")->check(CLI::ExistingFile);
  sim->add_option("--algos", algos, "comma-separated algorithm names");
  sim->add_option("--env", env, "environment name(s): homogeneous, heterogeneous or a configured one");
  sim->add_option("--max-total", max_total, "largest scenario size");
  sim->add_option("--seed", seed, "base seed");
  sim->add_option("--out", out_dir, "output directory");

  std::string counts, mode;
  auto* sweep = app.add_subcommand("sweep-workers", "response time against dispatch worker count");
  sweep->add_option("--config", config_file, "configuration file")->check(CLI::ExistingFile);
  sweep->add_option("--counts", counts, "comma-separated worker counts");
  sweep->add_option("--mode", mode, "sim or proxy")->check(CLI::IsMember({"sim", "proxy"}));
  sweep->add_option("--out", out_dir, "output directory");

  std::string listen;
  auto* proxy = app.add_subcommand("proxy", "run the reverse proxy until SIGINT/SIGTERM");
  proxy->add_option("--config", config_file, "configuration file")->required()->check(CLI::ExistingFile);
  proxy->add_option("--listen", listen, "override listen host:port");

  std::string backend_name = "echo";
  std::string backend_listen = "127.0.0.1:9001";
  double delay_ms = 0.0;
  std::optional<double> utilization;
  auto* backend = app.add_subcommand("backend", "run a loopback echo backend");
  backend->add_option("--name", backend_name, "server name echoed in responses");
  backend->add_option("--listen", backend_listen, "host:port");
  backend->add_option("--delay-ms", delay_ms, "per-request delay")->check(CLI::NonNegativeNumber);
  backend->add_option("--utilization", utilization, "value served at /utilization")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*sim) return run_sim(config_file, algos, env, max_total, seed, out_dir);
    if (*sweep) return run_sweep(config_file, counts, mode, out_dir);
    if (*proxy) return run_proxy(config_file, listen);
    if (*backend) return run_backend(backend_name, backend_listen, delay_ms, utilization);
  } catch (const bl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case bl::Errc::kInvalidConfig:
      case bl::Errc::kInvalidWeight:
      case bl::Errc::kInvalidStep:
      case bl::Errc::kInvalidWorkerCount:
      case bl::Errc::kParseError:
      case bl::Errc::kEmptyCatalog:
        return kConfigError;
      default:
        return 1;
    }
  }
  return 0;
}
