#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace slicer {

/// The single engine type used by every stochastic component.
using Rng = std::mt19937_64;

/// 64-bit FNV-1a over a byte string.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed of the named sub-stream `label` under run seed `seed`.
/// Streams are keyed by label so adding a consumer never shifts the others.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view label) noexcept {
  return splitmix64(seed ^ fnv1a64(label));
}

/// Seed of the `index`-th member of a family of labelled streams.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t index) noexcept {
  return splitmix64(stream_seed(seed, label) + splitmix64(index));
}

inline Rng make_stream(std::uint64_t seed, std::string_view label) {
  return Rng(stream_seed(seed, label));
}

inline Rng make_stream(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  return Rng(stream_seed(seed, label, index));
}

}  // namespace slicer
