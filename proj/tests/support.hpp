#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "balancelab/core.hpp"

namespace testing_support {

// Pool with ids 1..n, the given weights and optional per-server maxconn.
inline balancelab::BackendPool pool_with(const std::vector<std::uint32_t>& weights,
                                         std::optional<std::uint32_t> maxconn = std::nullopt) {
  std::vector<balancelab::ServerSpec> specs;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    balancelab::ServerSpec s;
    s.id = balancelab::ServerId{static_cast<std::uint32_t>(i + 1)};
    s.name = "s" + std::to_string(i + 1);
    s.weight = weights[i];
    s.maxconn = maxconn;
    specs.push_back(s);
  }
  return balancelab::BackendPool(std::move(specs));
}

inline balancelab::Request get(std::string path = "/", std::uint32_t ip = 0x0a000001) {
  balancelab::Request r;
  r.path = std::move(path);
  r.client_ip = ip;
  return r;
}

}  // namespace testing_support
