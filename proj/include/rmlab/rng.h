#pragma once

#include <cstdint>
#include <random>

namespace rmlab {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed for stream `index` within `name_space` of a run seeded with `seed`.
// Different namespaces never share a derivation path, which is how training
// and evaluation jobsets are kept apart.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t name_space, std::uint64_t index);

namespace seed_space {
inline constexpr std::uint64_t kTrain = 0x7472616e;     // training jobsets
inline constexpr std::uint64_t kEval = 0x6576616c;      // held-out evaluation jobsets
inline constexpr std::uint64_t kBc = 0x62636473;        // demonstration jobsets
inline constexpr std::uint64_t kRollout = 0x726f6c6c;   // action sampling
inline constexpr std::uint64_t kInit = 0x696e6974;      // parameter init
inline constexpr std::uint64_t kShuffle = 0x73687566;   // mini-batch order
}  // namespace seed_space

}  // namespace rmlab
