#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace lumber {

using Rng = std::mt19937_64;

/// Derive an independent generator from a base seed and a path of stream
/// indices, e.g. make_stream(seed, {chain}) or make_stream(seed, {fold, i}).
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size() + 1);
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  words.push_back(static_cast<std::uint32_t>(path.size()));
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace lumber
