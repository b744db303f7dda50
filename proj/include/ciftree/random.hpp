#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ciftree {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a root seed and a path of
/// integer labels. Every random draw in the library goes through this, so
/// results never depend on scheduling or on how many draws a sibling made.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(root);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream labels used with derive_seed.
namespace stream {
inline constexpr std::uint64_t kBootstrap = 1;
inline constexpr std::uint64_t kTree = 2;
inline constexpr std::uint64_t kXi = 3;
inline constexpr std::uint64_t kReplicate = 4;
inline constexpr std::uint64_t kSubject = 5;
inline constexpr std::uint64_t kFolds = 6;
inline constexpr std::uint64_t kTest = 7;
inline constexpr std::uint64_t kNuisance = 8;
inline constexpr std::uint64_t kTune = 9;
inline constexpr std::uint64_t kOracle = 10;
}  // namespace stream

}  // namespace ciftree
