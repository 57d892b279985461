#pragma once

#include <cstdint>
#include <random>

namespace s2c {

// Deterministic RNG stream. Wraps mt19937_64 and supports splitting child
// streams so batch items can be augmented independently yet reproducibly.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed ^ kMix) {}

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    std::uniform_int_distribution<int> d(lo, hi);
    return d(gen_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(gen_);
  }

  bool bernoulli(double p = 0.5) {
    std::bernoulli_distribution d(p);
    return d(gen_);
  }

  uint64_t next_u64() { return gen_(); }

  // Child stream decorrelated from the parent by a salt.
  Rng split(uint64_t salt) {
    uint64_t s = next_u64();
    return Rng(s ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  static constexpr uint64_t kMix = 0xd1b54a32d192ed03ULL;
  std::mt19937_64 gen_;
};

}  // namespace s2c
