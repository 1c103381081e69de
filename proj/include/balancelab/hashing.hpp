#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "balancelab/core.hpp"

namespace balancelab {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// FNV-1a over 64 bits. Stable across runs, processes and platforms.
constexpr std::uint64_t stable_hash(std::span<const std::byte> key) noexcept {
  std::uint64_t state = kFnvOffsetBasis;
  for (std::byte b : key) {
    state ^= static_cast<std::uint64_t>(b);
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t stable_hash(std::string_view key) noexcept {
  std::uint64_t state = kFnvOffsetBasis;
  for (char c : key) {
    state ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    state *= kFnvPrime;
  }
  return state;
}

// Maps a hash onto the weight-proportional slot ranges of the up servers:
// slot = hash mod sum_weight, and server s owns [prefix(s), prefix(s) + weight(s)).
// Returns an index into pool.servers().
inline std::size_t map_hash_to_index(std::uint64_t hash, const BackendPool& pool) {
  const std::uint64_t total = pool.sum_weight();
  if (total == 0) throw Error(Errc::kEmptyPool, "no up servers to map a hash onto");
  std::uint64_t slot = hash % total;
  const auto servers = pool.servers();
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (!servers[i].state.up) continue;
    if (slot < servers[i].spec.weight) return i;
    slot -= servers[i].spec.weight;
  }
  throw Error(Errc::kEmptyPool, "sum_weight out of sync with server list");
}

inline ServerId map_hash_to_server(std::uint64_t hash, const BackendPool& pool) {
  return pool.at(map_hash_to_index(hash, pool)).spec.id;
}

}  // namespace balancelab
