#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lssat {

// Independent random streams drawn from one experiment seed.
enum class RngStream : std::uint64_t {
  kInit = 1,
  kMask = 2,
  kDropPath = 3,
  kShuffle = 4,
  kSplit = 5,
  kSynth = 6,
};

// Counter-based key: the same (seed, stream, counters...) always yields the
// same engine, whatever order or thread the draws happen on.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters);

inline std::mt19937_64 make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
  return std::mt19937_64(derive_seed(seed, counters));
}

inline std::uint64_t stream_id(RngStream s) { return static_cast<std::uint64_t>(s); }

}  // namespace lssat
