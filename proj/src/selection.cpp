#include "bakr/selection.hpp"

#include <algorithm>
#include <cmath>

#include "bakr/parallel.hpp"
#include "bakr/rng.hpp"

namespace bakr {

namespace {
constexpr Index kDrawBlock = 1024;
}

Vector ppaa(const PosteriorChain& chain, double z) {
  if (!(z > 0.0)) {
    throw UsageError("ppaa threshold z must be positive");
  }
  const Index t_count = chain.draw_count();
  if (t_count < 1) {
    throw UsageError("ppaa: empty chain");
  }
  const Index p = chain.covariate_count();

  Vector counts = Vector::Zero(p);
  Matrix block;
  for (Index t0 = 0; t0 < t_count; t0 += kDrawBlock) {
    const Index rows = std::min(kDrawBlock, t_count - t0);
    block.noalias() =
        chain.theta_draws.middleRows(t0, rows) * chain.projection.transpose();
    counts += (block.array().abs() >= z)
                  .cast<double>()
                  .colwise()
                  .sum()
                  .matrix()
                  .transpose();
  }
  return counts / static_cast<double>(t_count);
}

double default_threshold(const PosteriorChain& chain, double kappa) {
  if (!(kappa > 0.0) || !(kappa < 1.0)) {
    throw UsageError("kappa must lie in (0, 1)");
  }
  const Index t_count = chain.draw_count();
  if (t_count < 1) {
    throw UsageError("default_threshold: empty chain");
  }
  const Index p = chain.covariate_count();

  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(t_count) * static_cast<std::size_t>(p));
  Matrix block;
  for (Index t0 = 0; t0 < t_count; t0 += kDrawBlock) {
    const Index rows = std::min(kDrawBlock, t_count - t0);
    block.noalias() =
        chain.theta_draws.middleRows(t0, rows) * chain.projection.transpose();
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < p; ++c) {
        pooled.push_back(std::abs(block(r, c)));
      }
    }
  }

  const std::size_t count = pooled.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil((1.0 - kappa) * static_cast<double>(count)));
  rank = std::clamp<std::size_t>(rank, 1, count);
  std::nth_element(pooled.begin(), pooled.begin() + (rank - 1), pooled.end());
  const double z = pooled[rank - 1];
  if (!(z > 0.0)) {
    throw NumericalError("default_threshold: pooled magnitude quantile is zero");
  }
  return z;
}

std::vector<Index> select(const Vector& ppaa_values, double r) {
  if (!(r > 0.0) || !(r < 1.0)) {
    throw UsageError("inclusion cutoff r must lie in (0, 1)");
  }
  return select_above(ppaa_values, r);
}

std::vector<Index> select_above(const Vector& ppaa_values, double r) {
  std::vector<Index> chosen;
  for (Index j = 0; j < ppaa_values.size(); ++j) {
    if (ppaa_values(j) > r) chosen.push_back(j);
  }
  return chosen;
}

PermutationCalibration permutation_threshold(
    const Vector& y, const KernelFactorization& fact, const ProjectionOperator& proj,
    const HyperParams& hp, const SamplerConfig& cfg, double working_z, int n_perm,
    double fwer, std::uint64_t seed, int threads) {
  if (n_perm < 1) {
    throw UsageError("permutation count must be >= 1");
  }
  if (!(fwer > 0.0) || !(fwer < 1.0)) {
    throw UsageError("fwer must lie in (0, 1)");
  }
  if (!(working_z > 0.0)) {
    throw UsageError("working z must be positive");
  }

  PermutationCalibration cal;
  cal.working_z = working_z;
  cal.n_perm = n_perm;
  cal.fwer = fwer;
  cal.max_ppaa.assign(n_perm, 0.0);

  const Index n = y.size();
  parallel_for(n_perm, threads, [&](Index i) {
    Rng shuffle_rng(mix_seed(seed, 2 * static_cast<std::uint64_t>(i)));
    std::vector<Index> order(n);
    for (Index r = 0; r < n; ++r) order[r] = r;
    shuffle_rng.shuffle(order);
    Vector y_perm(n);
    for (Index r = 0; r < n; ++r) y_perm(r) = y(order[r]);

    SamplerConfig perm_cfg = cfg;
    perm_cfg.seed = mix_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1);
    const PosteriorChain chain = gibbs_fit(y_perm, fact, proj, hp, perm_cfg);
    cal.max_ppaa[i] = ppaa(chain, working_z).maxCoeff();
  });

  std::vector<double> sorted = cal.max_ppaa;
  std::sort(sorted.begin(), sorted.end());
  const int rank = static_cast<int>(
      std::ceil((1.0 - fwer) * static_cast<double>(n_perm + 1)));
  if (rank > n_perm) {
    cal.conservative_max_used = true;
    cal.inclusion_r = sorted.back();
  } else {
    cal.inclusion_r = sorted[rank - 1];
  }
  return cal;
}

}  // namespace bakr
