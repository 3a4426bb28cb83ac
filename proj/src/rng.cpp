#include "samga/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace samga {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}
}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) {
  return splitmix64(splitmix64(seed) ^ fnv1a(stream));
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream, std::uint64_t a,
                          std::uint64_t b) {
  return splitmix64(splitmix64(stream_seed(seed, stream) ^ a) ^ (b * 0xD6E8FEB86659FD93ULL));
}

std::vector<std::uint64_t> engine_state(const Engine& engine) {
  std::ostringstream os;
  os << engine;
  std::istringstream is(os.str());
  std::vector<std::uint64_t> words;
  std::uint64_t w = 0;
  while (is >> w) words.push_back(w);
  return words;
}

Engine engine_from_state(const std::vector<std::uint64_t>& words) {
  std::ostringstream os;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) os << ' ';
    os << words[i];
  }
  std::istringstream is(os.str());
  Engine engine;
  is >> engine;
  if (is.fail()) throw std::runtime_error("corrupt rng state");
  return engine;
}

}  // namespace samga
