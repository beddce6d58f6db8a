#pragma once

#include <cstdint>
#include <string>

#include "bakr/common.hpp"

namespace bakr {

enum class KernelFamily { GaussianRff, GaussianExact, LinearExact };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// Kernel recipe. `bandwidth` multiplies the squared Euclidean distance:
// k_h(u, v) = exp(-h * |u - v|^2). The linear family k(u, v) = u'v / p
// ignores bandwidth and feature_count.
struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianRff;
  double bandwidth = 1.0;
  Index feature_count = 0;  // number of random Fourier bases d
  std::uint64_t seed = 0;

  void validate() const;
};

// Random cosine basis: column l of omega is a frequency drawn from the
// Gaussian kernel's spectral density N(0, 2h I_p); phase entries are
// uniform on [0, 2*pi). Regenerating with the same seed is bit-identical.
struct FourierFeatureMap {
  Matrix omega;  // p x d
  Vector phase;  // length d
  KernelSpec spec;

  Index covariate_count() const { return omega.rows(); }
  Index feature_count() const { return omega.cols(); }
};

// Truncated spectral factorization K ~= U diag(lambda) U'.
struct KernelFactorization {
  Matrix u;       // n x q, orthonormal columns
  Vector lambda;  // length q, positive, descending
  double variance_explained = 0.0;
  KernelSpec source;

  Index q() const { return lambda.size(); }
};

struct ApproximationError {
  double frobenius_rel = 0.0;
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

// Draws the random Fourier basis for `covariate_count` inputs.
FourierFeatureMap sample_fourier_basis(Index covariate_count, const KernelSpec& spec);

// Row i of the result is sqrt(2/d) * cos(x_i' Omega + b). Entries are
// bounded by sqrt(2/d) in magnitude.
Matrix feature_map(const FourierFeatureMap& fmap, const Matrix& x);

// K = Phi Phi', symmetric PSD by construction.
Matrix approx_kernel(const Matrix& phi);

// Gaussian-exact or linear-exact kernel matrix; rejects the RFF family.
Matrix exact_kernel(const Matrix& x, const KernelSpec& spec);

// Keeps the smallest q whose eigenvalues reach `variance_threshold` of the
// positive spectrum mass; eigenvalues below 1e-10 * lambda_1 are never
// included and negative round-off eigenvalues are clamped to zero.
KernelFactorization factorize(const Matrix& k, double variance_threshold,
                              const KernelSpec& source = KernelSpec{});

ApproximationError approximation_error(const Matrix& k_exact, const Matrix& k_approx);

}  // namespace bakr
