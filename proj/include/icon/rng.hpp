#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace icon {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic seed derived from a base seed and a list of stream labels.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels);

// Portable random source. The std:: distributions are implementation-defined,
// so every draw used by the library goes through these helpers instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi] (inclusive).
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace icon
