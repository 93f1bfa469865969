#pragma once

#include <cstdint>
#include <random>

namespace fbmips {

/// Purpose tags keep noise used for different roles in one replication
/// statistically independent.
enum class StreamPurpose : std::uint64_t {
  kNoise = 1,
  kInitial = 2,
  kReference = 3,
  kReferenceInitial = 4,
};

/// Identifies one named substream: (master seed, replication, particle, purpose).
struct StreamId {
  std::uint64_t master_seed = 0;
  std::uint64_t replication = 0;
  std::uint64_t particle = 0;
  StreamPurpose purpose = StreamPurpose::kNoise;
};

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit seed for a substream; depends only on the id, never on call order.
std::uint64_t derive_seed(const StreamId& id);

using Engine = std::mt19937_64;

Engine make_engine(const StreamId& id);

}  // namespace fbmips
