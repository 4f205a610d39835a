// Seed derivation and deterministic uniform sampling.
//
// Every random decision in a trial draws from a stream rng whose seed is
// derived from (master_seed, trial_index, stream).  Results therefore do not
// depend on worker count or scheduling order.

#pragma once

#include <cstdint>
#include <random>

namespace twentyq {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent randomness streams within one trial.
enum class Stream : std::uint64_t {
  StopAtZero = 0,
  Codebook = 1,
  ChannelNoise = 2,
  Adversary = 3,
  Target = 4,
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, Stream stream,
                                 std::uint64_t substream = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= (trial + 0x9e3779b97f4a7c15ULL) * 0xff51afd7ed558ccdULL;
  std::uint64_t b = splitmix64(s);
  s ^= (static_cast<std::uint64_t>(stream) + 1) * 0xc4ceb9fe1a85ec53ULL;
  s ^= (substream + 1) * 0xd6e8feb86659fd93ULL;
  std::uint64_t c = splitmix64(s);
  return a ^ (b + (c << 1) + 1);
}

// mt19937_64 plus uniform helpers with fully specified output, so identical
// seeds give identical draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n); n > 0.  Fixed-point multiply, bias < n / 2^64.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace twentyq
