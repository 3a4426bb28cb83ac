#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace samga {

// All randomness in a run flows from one root seed through named sub-streams
// ("data", "init", "dropout", "shuffle", ...). Sub-stream seeds are pure
// functions of their inputs so per-sample draws can be reproduced in any order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream, std::uint64_t a,
                          std::uint64_t b = 0);

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::string_view stream) {
  return Engine(stream_seed(seed, stream));
}

// Engine state as a flat list of 64-bit words (for checkpoints).
std::vector<std::uint64_t> engine_state(const Engine& engine);
Engine engine_from_state(const std::vector<std::uint64_t>& words);

// Standard normal draw built on std::normal_distribution.
template <typename T>
T gaussian(Engine& engine) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return static_cast<T>(dist(engine));
}

}  // namespace samga
