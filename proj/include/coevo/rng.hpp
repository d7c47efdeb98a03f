#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

// Deterministic random streams. Every consumer derives an independent
// mt19937_64 from (seed, tag, ids...) so results are bit-reproducible and
// independent of evaluation order. Only the engine comes from <random>;
// the value transforms are written out explicitly because the standard
// distributions are implementation-defined.

namespace coevo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Stream tags; distinct constants keep unrelated consumers decorrelated.
namespace streams {
inline constexpr std::uint64_t kTaskGen = 0x7461736B67656E01ULL;
inline constexpr std::uint64_t kBiasDraw = 0x6269617364727702ULL;
inline constexpr std::uint64_t kTrainSample = 0x747261696E730303ULL;
inline constexpr std::uint64_t kEvalSample = 0x6576616C73616D04ULL;
inline constexpr std::uint64_t kTrial = 0x747269616C050505ULL;
}  // namespace streams

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t seed, Parts... parts) {
  std::uint64_t h = splitmix64(seed);
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(parts))), ...);
  return h;
}

template <typename... Parts>
std::mt19937_64 stream(std::uint64_t seed, Parts... parts) {
  return std::mt19937_64(derive_seed(seed, parts...));
}

// Uniform on [0, 1), 53-bit resolution.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Box-Muller; consumes two engine outputs per call.
inline double normal(std::mt19937_64& g, double mean = 0.0, double stddev = 1.0) {
  const double u1 = (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(g() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

// Inverse-CDF draw from a categorical distribution.
inline int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs, std::mt19937_64& g) {
  const double u = uniform01(g);
  double cum = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return n - 1;  // guard against accumulated rounding
}

}  // namespace coevo
