#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stpot {

// SplitMix64 finalizer, used to derive independent seeds from (seed, stream, index).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named substreams. Values are part of the reproducibility contract; do not renumber.
namespace stream {
inline constexpr std::uint64_t prior = 1;
inline constexpr std::uint64_t train_batch = 2;
inline constexpr std::uint64_t heldout = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t gibbs = 5;
inline constexpr std::uint64_t observed = 6;
inline constexpr std::uint64_t diagnostics = 7;
inline constexpr std::uint64_t recovery = 8;
inline constexpr std::uint64_t weights = 9;
inline constexpr std::uint64_t shuffle = 10;
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  // Counter-based child stream: depends only on its coordinates, never on draw order elsewhere.
  static Rng substream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t index = 0) {
    return Rng(mix64(seed ^ mix64(stream_id ^ mix64(index + 0x632be59bd9b4e019ULL))));
  }

  // Fork a child stream from the current state (consumes one draw).
  Rng split() { return Rng(engine_()); }

  std::uint64_t next() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double exponential() { return -std::log(uniform()); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace stpot
