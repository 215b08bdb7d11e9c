#include "muse/rng.hpp"

namespace muse {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t stream_key(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  std::uint64_t k = splitmix64(seed ^ fnv1a(tag));
  return splitmix64(k ^ splitmix64(index));
}

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return std::mt19937_64(stream_key(seed, tag, index));
}

}  // namespace muse
