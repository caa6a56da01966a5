#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fedcost {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the named sub-stream `name[a][b]` under `master`. Every random
/// quantity in the library comes from one of these, so results never depend
/// on thread count or evaluation order.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view name,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(master ^ hash_name(name));
  s = mix64(s ^ mix64(a + 0x632be59bd9b4e019ULL));
  s = mix64(s ^ mix64(b + 0x8cb92ba72f3d8dd7ULL));
  return s;
}

inline Rng make_stream(std::uint64_t master, std::string_view name, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng(stream_seed(master, name, a, b));
}

/// Normal draw rejected until strictly above `lower`.
inline double truncated_normal(Rng& rng, double mean, double stddev, double lower = 0.0) {
  if (stddev <= 0.0) return mean;
  std::normal_distribution<double> dist(mean, stddev);
  for (;;) {
    double x = dist(rng);
    if (x > lower) return x;
  }
}

}  // namespace fedcost
