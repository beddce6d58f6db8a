#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bakr {

// splitmix64 finalizer; derives well-separated stream seeds from a base seed
// so parallel jobs (benchmark cells, permutation fits) stay reproducible.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded draw source. All stochastic code in the project goes through this
// class so a run is reproducible from the integers recorded in its config.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

  // Uniform on [lo, hi).
  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }

  double chi_squared(double dof) {
    return std::chi_squared_distribution<double>(dof)(engine_);
  }

  // s2 ~ Scale-inv-chi^2(nu, scale), realized as nu*scale / chi^2_nu.
  double scaled_inv_chi_squared(double dof, double scale) {
    return dof * scale / chi_squared(dof);
  }

  int binomial(int trials, double prob) {
    return std::binomial_distribution<int>(trials, prob)(engine_);
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace bakr
