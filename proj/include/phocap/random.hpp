#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace phocap {

using Rng = std::mt19937_64;

// Seed derivation tree. Every random stream in the pipeline is keyed by
// (parent seed, stream tag, index) so subsystems stay reproducible in isolation:
//
//   master
//    |- "split"             dataset split
//    |- "cv"/target         fold assignment for component selection
//    |- "cars"/block/target  -> per-loop seeds (index = loop)
//    |- "synth"             synthetic traits, spectra, A/Ci noise
//    `- "aci-start"         multi-start draws for curve fitting

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag,
                                 std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(parent ^ fnv1a64(tag)) + index);
}

}  // namespace phocap
