#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pnrate {

/// All randomness comes from 64-bit Mersenne Twister streams. Draws are
/// bit-reproducible for a fixed (seed, standard library) pair.
using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Pure function of (master, key); used to give every sweep cell its own
/// stream independent of scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view key);

/// Independent streams for one channel realization. Keeping symbols, phase
/// and additive noise apart means two runs that differ only in the receiver
/// (L, S) see the same transmitted symbols and the same phase path.
struct RunStreams {
  explicit RunStreams(std::uint64_t seed);

  Engine symbols;
  Engine phase;
  Engine noise;
};

}  // namespace pnrate
