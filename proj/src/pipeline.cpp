#include "bakr/pipeline.hpp"

#include <cmath>

namespace bakr {

FitResult fit_pipeline(const DesignMatrix& x, const Vector& y, const FitConfig& cfg) {
  if (x.n() != y.size()) {
    throw DataError("fit_pipeline: X has " + std::to_string(x.n()) +
                    " rows but y has " + std::to_string(y.size()) + " entries");
  }

  FitResult result;
  DesignMatrix std_x;
  if (cfg.standardize_x) {
    std_x = standardize(x);
  } else {
    std_x = x;
    Standardization identity;
    identity.mean = Vector::Zero(x.p());
    identity.sd = Vector::Ones(x.p());
    for (Index c = 0; c < x.p(); ++c) identity.kept.push_back(c);
    std_x.standardization = std::move(identity);
  }
  result.preprocessing.standardization = *std_x.standardization;

  const Index p_kept = std_x.p();
  KernelSpec spec = cfg.kernel;
  if (spec.family == KernelFamily::GaussianRff && spec.feature_count == 0) {
    spec.feature_count = p_kept;
  }

  const bool gaussian = spec.family != KernelFamily::LinearExact;
  result.preprocessing.kernel_scale =
      gaussian ? 1.0 / std::sqrt(static_cast<double>(p_kept)) : 1.0;
  result.design = std_x.values * result.preprocessing.kernel_scale;

  Matrix kernel_matrix;
  Matrix phi;
  const Matrix* phi_ptr = nullptr;
  if (spec.family == KernelFamily::GaussianRff) {
    const FourierFeatureMap fmap = sample_fourier_basis(p_kept, spec);
    phi = feature_map(fmap, result.design);
    kernel_matrix = approx_kernel(phi);
    phi_ptr = &phi;
  } else {
    kernel_matrix = exact_kernel(result.design, spec);
  }

  result.factorization = factorize(kernel_matrix, cfg.variance_threshold, spec);
  const ProjectionOperator proj = build_projection(
      result.design, result.factorization, cfg.projection, cfg.pinv_tolerance,
      phi_ptr);

  const double y_offset = cfg.center_y ? y.mean() : 0.0;
  const Vector y_fit = y.array() - y_offset;
  result.chain = gibbs_fit(y_fit, result.factorization, proj, cfg.hyper, cfg.sampler);
  result.chain.info.y_offset = y_offset;
  result.chain.info.variance_threshold = cfg.variance_threshold;
  return result;
}

}  // namespace bakr
