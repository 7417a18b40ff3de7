#include "pnrate/rng.hpp"

namespace pnrate {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
  // FNV-1a over the key, then mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master) ^ h);
}

RunStreams::RunStreams(std::uint64_t seed)
    : symbols(splitmix64(seed ^ 0x1ULL)),
      phase(splitmix64(seed ^ 0x2ULL)),
      noise(splitmix64(seed ^ 0x3ULL)) {}

}  // namespace pnrate
