#pragma once

#include <cstdint>
#include <vector>

#include "bakr/common.hpp"
#include "bakr/model.hpp"

namespace bakr {

double mspe(const Vector& y, const Vector& y_hat);

// 1 - SSE/SST; can be negative for predictors worse than the mean.
double r_squared(const Vector& y, const Vector& y_hat);

struct PowerCurve {
  std::vector<Index> ranking;  // covariates ordered by descending magnitude
  std::vector<double> tpr;     // length p+1, starts at 0
  std::vector<double> fpr;
  double auc = 0.0;
};

// Ranks covariates by |effect| (ties broken by ascending index) and walks
// the prefix true/false positive rates against the truth set.
PowerCurve power_curve(const Vector& magnitudes, const std::vector<Index>& truth);

enum class VdSeedMode {
  PerCell,              // independent chain seed per (kernel, chain)
  SharedWithinKernel,   // chains inside a kernel reuse one seed
  SharedAcrossKernels,  // chain m reuses its seed across kernels
  AllShared,            // every run identical
};

struct VarianceDecompositionConfig {
  double bandwidth = 1.0;
  double variance_threshold = 0.95;
  HyperParams hyper;
  SamplerConfig sampler;
  ProjectionMode projection = ProjectionMode::Collapsed;
  std::uint64_t base_seed = 0;
  VdSeedMode seed_mode = VdSeedMode::PerCell;
  bool exact_kernel = false;  // replaces RFF resampling with the exact kernel
  int threads = 1;
};

struct VarianceDecomposition {
  double total_variance = 0.0;  // sample variance of R^2 over all runs
  double between_kernel_proportion = 0.0;
  double within_chain_proportion = 0.0;
  int kernels = 0;
  int chains_per_kernel = 0;
  bool degenerate = false;  // zero total variance
  Matrix r2;                // kernels x chains
};

// Fits n_kernels independent feature maps with chains_per_kernel Gibbs runs
// each and splits the variance of in-sample R^2 into kernel-resampling and
// chain-sampling components (one-way random effects; negative estimates
// clamped to zero).
VarianceDecomposition variance_decomposition(const Matrix& design, const Vector& y,
                                             int n_kernels, int chains_per_kernel,
                                             const VarianceDecompositionConfig& cfg);

}  // namespace bakr
