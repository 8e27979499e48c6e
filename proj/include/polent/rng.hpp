#pragma once

#include <cstdint>
#include <random>

namespace polent {

/// SplitMix64 finalizer; used to decorrelate (seed, index) pairs.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for one scan point. The stream depends only on
/// (seed, index), never on scheduling, so parallel scans are reproducible.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return std::mt19937_64(seq);
}

/// Poisson draw; a nonpositive mean yields 0.
inline std::uint64_t poisson_draw(std::mt19937_64& engine, double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<long long> dist(mean);
  return static_cast<std::uint64_t>(dist(engine));
}

}  // namespace polent
