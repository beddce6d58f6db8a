#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bakr/common.hpp"
#include "bakr/model.hpp"

namespace bakr {

// Per-covariate posterior probability that |beta_j| clears the hard
// threshold z: ppaa_j = (1/T) sum_t 1{|beta_j(t)| >= z}.
Vector ppaa(const PosteriorChain& chain, double z);

// z = ceil((1-kappa)*N)-th smallest of the pooled |beta_j(t)| over all
// covariates and draws; an exact member of the pooled set.
double default_threshold(const PosteriorChain& chain, double kappa = 0.05);

// Median-probability-model style cut: {j : ppaa_j > r} with r in (0, 1).
std::vector<Index> select(const Vector& ppaa_values, double r = 0.5);

// Same cut without the range check; permutation-calibrated cutoffs may sit
// exactly at 0 (no permutation exceedance) or 1 (saturated null).
std::vector<Index> select_above(const Vector& ppaa_values, double r);

struct PermutationCalibration {
  double inclusion_r = 0.0;
  double working_z = 0.0;
  int n_perm = 0;
  double fwer = 0.0;
  std::vector<double> max_ppaa;      // per-permutation maxima
  bool conservative_max_used = false;  // quantile rank exceeded n_perm
};

// Family-wise calibration of the inclusion cutoff: each permutation shuffles
// the response, refits the Gibbs sampler against the unchanged kernel
// factorization, and records its maximum PPAA at the working z. The cutoff
// is the ceil((1-fwer)(n_perm+1))-th order statistic of those maxima, or the
// conservative maximum when the rank exceeds n_perm.
PermutationCalibration permutation_threshold(
    const Vector& y, const KernelFactorization& fact, const ProjectionOperator& proj,
    const HyperParams& hp, const SamplerConfig& cfg, double working_z, int n_perm,
    double fwer, std::uint64_t seed, int threads = 1);

struct AssociationResult {
  Vector ppaa;
  double threshold_z = 0.0;
  double inclusion_r = 0.5;
  std::vector<Index> selected;
  std::string calibration;  // "fixed", "default-quantile", or "permutation"
  int n_perm = 0;
  double fwer = 0.0;
};

}  // namespace bakr
