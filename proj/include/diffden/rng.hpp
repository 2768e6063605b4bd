#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace diffden {

/// Seeded random stream. Two streams built from the same (seed, stream) pair
/// produce identical sequences; different stream ids are decorrelated through
/// std::seed_seq.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(make_engine(seed, stream)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double gaussian() { return normal_(engine_); }

  void fill_gaussian(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace diffden
