#pragma once

#include <cstdint>
#include <random>

namespace fbslab {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: replica `counter` of stream `stream` under
/// `root` gets a seed that depends only on the triple, so any replica can be
/// regenerated in isolation and the result does not depend on worker count.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(root) ^ (stream * 0xD1B54A32D192ED03ULL)) ^ counter);
}

inline Engine make_engine(std::uint64_t root, std::uint64_t stream, std::uint64_t counter) {
  return Engine(derive_seed(root, stream, counter));
}

/// Stream identifiers keep the random tapes of different consumers disjoint.
namespace streams {
inline constexpr std::uint64_t kField = 1;
inline constexpr std::uint64_t kCoupling = 2;
inline constexpr std::uint64_t kDependence = 3;
inline constexpr std::uint64_t kLongRun = 4;
inline constexpr std::uint64_t kCentering = 5;
inline constexpr std::uint64_t kPartialSums = 6;
inline constexpr std::uint64_t kBlocking = 7;
inline constexpr std::uint64_t kOracle = 8;
inline constexpr std::uint64_t kOracleDense = 9;
inline constexpr std::uint64_t kMoment = 10;
inline constexpr std::uint64_t kBootstrap = 11;
inline constexpr std::uint64_t kWeightCorpus = 12;
inline constexpr std::uint64_t kSweep = 13;
inline constexpr std::uint64_t kFarField = 14;
inline constexpr std::uint64_t kReplica = 15;
}  // namespace streams

}  // namespace fbslab
