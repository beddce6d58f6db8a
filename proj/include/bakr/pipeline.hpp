#pragma once

#include <optional>

#include "bakr/common.hpp"
#include "bakr/data.hpp"
#include "bakr/kernel.hpp"
#include "bakr/model.hpp"

namespace bakr {

// Everything needed to map raw covariate rows onto the kernel design the
// chain was fit against: training standardization followed by a global
// scale. Gaussian kernels take standardized rows scaled by 1/sqrt(p), so
// exp(-h |u - v|^2) sees mean squared coordinate differences rather than
// sums that grow with dimension; the linear kernel divides by p internally
// and uses scale 1.
struct Preprocessing {
  Standardization standardization;
  double kernel_scale = 1.0;

  Matrix apply(const Matrix& raw) const {
    return apply_standardization(raw, standardization) * kernel_scale;
  }
};

struct FitConfig {
  KernelSpec kernel;  // feature_count 0 resolves to the retained column count
  double variance_threshold = 0.95;
  ProjectionMode projection = ProjectionMode::Collapsed;
  double pinv_tolerance = kDefaultPinvTolerance;
  HyperParams hyper;
  SamplerConfig sampler;
  bool standardize_x = true;
  bool center_y = true;
};

struct FitResult {
  PosteriorChain chain;
  KernelFactorization factorization;
  Preprocessing preprocessing;
  Matrix design;  // kernel-ready training matrix (n x p_kept)
};

// standardize -> kernel -> factorize -> projection -> Gibbs.
FitResult fit_pipeline(const DesignMatrix& x, const Vector& y, const FitConfig& cfg);

}  // namespace bakr
