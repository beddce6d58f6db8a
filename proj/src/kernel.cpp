#include "bakr/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "bakr/rng.hpp"

namespace bakr {

namespace {
constexpr double kEigenvalueFloorRel = 1e-10;
constexpr double kSymmetryTolRel = 1e-10;
}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::GaussianRff:
      return "gaussian-rff";
    case KernelFamily::GaussianExact:
      return "gaussian-exact";
    case KernelFamily::LinearExact:
      return "linear-exact";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "gaussian-rff") return KernelFamily::GaussianRff;
  if (name == "gaussian-exact") return KernelFamily::GaussianExact;
  if (name == "linear-exact") return KernelFamily::LinearExact;
  throw UsageError("unknown kernel family: " + name);
}

void KernelSpec::validate() const {
  if (family == KernelFamily::LinearExact) return;
  if (!(bandwidth > 0.0)) {
    throw UsageError("invalid kernel spec: bandwidth must be positive, got " +
                     std::to_string(bandwidth));
  }
  if (family == KernelFamily::GaussianRff && feature_count < 1) {
    throw UsageError("invalid kernel spec: feature count must be >= 1, got " +
                     std::to_string(feature_count));
  }
}

FourierFeatureMap sample_fourier_basis(Index covariate_count, const KernelSpec& spec) {
  if (spec.family != KernelFamily::GaussianRff) {
    throw UsageError("sample_fourier_basis requires the gaussian-rff family");
  }
  spec.validate();
  if (covariate_count < 1) {
    throw UsageError("covariate count must be >= 1");
  }

  const Index p = covariate_count;
  const Index d = spec.feature_count;
  // Frequencies for exp(-h |z|^2) are N(0, 2h) per coordinate.
  const double freq_sd = std::sqrt(2.0 * spec.bandwidth);

  Rng rng(spec.seed);
  FourierFeatureMap fmap;
  fmap.spec = spec;
  fmap.omega.resize(p, d);
  for (Index l = 0; l < d; ++l) {
    for (Index j = 0; j < p; ++j) {
      fmap.omega(j, l) = rng.normal(0.0, freq_sd);
    }
  }
  fmap.phase.resize(d);
  for (Index l = 0; l < d; ++l) {
    fmap.phase(l) = rng.uniform(0.0, 2.0 * M_PI);
  }
  return fmap;
}

Matrix feature_map(const FourierFeatureMap& fmap, const Matrix& x) {
  if (x.cols() != fmap.covariate_count()) {
    throw DataError("feature_map: input has " + std::to_string(x.cols()) +
                    " columns, feature map expects " +
                    std::to_string(fmap.covariate_count()));
  }
  const double scale = std::sqrt(2.0 / static_cast<double>(fmap.feature_count()));
  Matrix phi = x * fmap.omega;
  phi.rowwise() += fmap.phase.transpose();
  return scale * phi.array().cos();
}

Matrix approx_kernel(const Matrix& phi) {
  const Index n = phi.rows();
  Matrix k = Matrix::Zero(n, n);
  k.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

Matrix exact_kernel(const Matrix& x, const KernelSpec& spec) {
  spec.validate();
  const Index n = x.rows();
  const Index p = x.cols();
  if (spec.family == KernelFamily::LinearExact) {
    Matrix k = Matrix::Zero(n, n);
    k.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / static_cast<double>(p));
    k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
    return k;
  }
  if (spec.family != KernelFamily::GaussianExact) {
    throw UsageError("exact_kernel: gaussian-rff kernels are built via "
                     "sample_fourier_basis/feature_map/approx_kernel");
  }

  Matrix gram = Matrix::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  const Vector sq = gram.diagonal();
  Matrix k(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double dist2 = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      const double value = std::exp(-spec.bandwidth * dist2);
      k(i, j) = value;
      k(j, i) = value;
    }
  }
  return k;
}

KernelFactorization factorize(const Matrix& k, double variance_threshold,
                              const KernelSpec& source) {
  if (k.rows() != k.cols()) {
    throw DataError("factorize: kernel matrix must be square");
  }
  if (!(variance_threshold > 0.0) || variance_threshold > 1.0) {
    throw UsageError("variance threshold must lie in (0, 1]");
  }
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolRel * scale) {
    throw NumericalError("factorize: kernel matrix is not symmetric (max "
                         "asymmetry " + std::to_string(asym) + ")");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (k + k.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("factorize: eigendecomposition failed");
  }
  // Eigen returns ascending order; flip to descending.
  const Vector evals = solver.eigenvalues().reverse();
  const Matrix evecs = solver.eigenvectors().rowwise().reverse();

  const Vector clamped = evals.cwiseMax(0.0);
  const double total = clamped.sum();
  if (!(total > 0.0)) {
    throw NumericalError("factorize: kernel has no positive spectrum");
  }
  const double floor = kEigenvalueFloorRel * clamped(0);

  Index q = 0;
  double cum = 0.0;
  for (Index i = 0; i < clamped.size(); ++i) {
    if (clamped(i) < floor || clamped(i) <= 0.0) break;
    cum += clamped(i);
    ++q;
    if (cum >= variance_threshold * total) break;
  }

  KernelFactorization fact;
  fact.u = evecs.leftCols(q);
  fact.lambda = clamped.head(q);
  fact.variance_explained = cum / total;
  fact.source = source;
  return fact;
}

ApproximationError approximation_error(const Matrix& k_exact, const Matrix& k_approx) {
  if (k_exact.rows() != k_approx.rows() || k_exact.cols() != k_approx.cols()) {
    throw DataError("approximation_error: dimension mismatch");
  }
  const Matrix diff = k_exact - k_approx;
  ApproximationError err;
  const double denom = k_exact.norm();
  err.frobenius_rel = denom > 0.0 ? diff.norm() / denom : diff.norm();
  err.max_abs = diff.cwiseAbs().maxCoeff();
  err.mean_abs = diff.cwiseAbs().mean();
  return err;
}

}  // namespace bakr
