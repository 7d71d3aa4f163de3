#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crowd/util.hpp"

namespace crowd {

// Deterministic random stream. All distributions are implemented by hand on
// top of mt19937_64 so that a given seed produces the same values on every
// platform; std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; always consumes two draws, no cached spare.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  std::size_t index(std::size_t n) {
    require(n > 0, "Rng::index: empty range");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Draw from a discrete distribution given by `probs` (assumed to sum to 1).
  std::size_t discrete(const std::vector<double>& probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; advances this stream by one draw.
  Rng fork(std::uint64_t tag) { return Rng(mix64(gen_(), tag)); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace crowd
