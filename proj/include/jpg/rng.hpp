#pragma once

#include <cstdint>
#include <random>

namespace jpg {

// splitmix64; used to derive independent stream seeds from a master seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic per-task stream: results do not depend on thread count as
// long as each task derives its engine from (master_seed, task_index).
inline std::mt19937_64 make_stream(std::uint64_t master_seed,
                                   std::uint64_t stream_id) {
  return std::mt19937_64(mix64(mix64(master_seed) ^ mix64(stream_id + 1)));
}

}  // namespace jpg
