#include "fbmips/rng.hpp"

namespace fbmips {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(const StreamId& id) {
  std::uint64_t h = splitmix64(id.master_seed);
  h = splitmix64(h ^ id.replication);
  h = splitmix64(h ^ (id.particle * 0xD1B54A32D192ED03ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(id.purpose));
  return h;
}

Engine make_engine(const StreamId& id) {
  const std::uint64_t s = derive_seed(id);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Engine(seq);
}

}  // namespace fbmips
