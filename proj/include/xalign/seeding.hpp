#pragma once

#include <cstdint>

namespace xalign {

// splitmix64 finalizer; used to derive independent sub-seeds from (seed, stream, index).
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

}  // namespace xalign
