#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fsner {

// Deterministic random source. All randomness in the library flows from one
// root seed through named sub-streams so that sampling, parameter init and
// shuffling are independently reproducible. Gaussian and shuffle primitives
// are hand-rolled on top of mt19937_64 to keep bit-identical behaviour
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Sub-stream derived from (root, stream name, index).
  static Rng child(std::uint64_t root, std::string_view stream,
                   std::uint64_t index = 0);

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (caches the spare deviate).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates; std::shuffle's algorithm is unspecified.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a, also used for config fingerprints.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace fsner
