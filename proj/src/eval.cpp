#include "bakr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bakr/parallel.hpp"
#include "bakr/rng.hpp"

namespace bakr {

double mspe(const Vector& y, const Vector& y_hat) {
  if (y.size() != y_hat.size()) {
    throw DataError("mspe: length mismatch");
  }
  if (y.size() < 1) {
    throw UsageError("mspe: empty input");
  }
  return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

double r_squared(const Vector& y, const Vector& y_hat) {
  if (y.size() != y_hat.size()) {
    throw DataError("r_squared: length mismatch");
  }
  const double sst = (y.array() - y.mean()).square().sum();
  if (!(sst > 0.0)) {
    throw UsageError("r_squared: constant response");
  }
  const double sse = (y - y_hat).squaredNorm();
  return 1.0 - sse / sst;
}

PowerCurve power_curve(const Vector& magnitudes, const std::vector<Index>& truth) {
  const Index p = magnitudes.size();
  if (truth.empty()) {
    throw UsageError("power_curve: empty truth set");
  }
  std::vector<bool> is_causal(p, false);
  for (Index j : truth) {
    if (j < 0 || j >= p) {
      throw UsageError("power_curve: truth index out of range");
    }
    is_causal[j] = true;
  }
  const Index n_causal = static_cast<Index>(truth.size());
  const Index n_null = p - n_causal;
  if (n_null == 0) {
    throw UsageError("power_curve: truth covers every covariate");
  }

  PowerCurve curve;
  curve.ranking.resize(p);
  std::iota(curve.ranking.begin(), curve.ranking.end(), Index{0});
  std::sort(curve.ranking.begin(), curve.ranking.end(), [&](Index a, Index b) {
    if (magnitudes(a) != magnitudes(b)) return magnitudes(a) > magnitudes(b);
    return a < b;
  });

  curve.tpr.assign(p + 1, 0.0);
  curve.fpr.assign(p + 1, 0.0);
  Index tp = 0;
  Index fp = 0;
  double auc = 0.0;
  for (Index k = 0; k < p; ++k) {
    if (is_causal[curve.ranking[k]]) {
      ++tp;
    } else {
      ++fp;
      auc += static_cast<double>(tp);
    }
    curve.tpr[k + 1] = static_cast<double>(tp) / static_cast<double>(n_causal);
    curve.fpr[k + 1] = static_cast<double>(fp) / static_cast<double>(n_null);
  }
  curve.auc = auc / (static_cast<double>(n_causal) * static_cast<double>(n_null));
  return curve;
}

VarianceDecomposition variance_decomposition(const Matrix& design, const Vector& y,
                                             int n_kernels, int chains_per_kernel,
                                             const VarianceDecompositionConfig& cfg) {
  if (n_kernels < 2 || chains_per_kernel < 2) {
    throw UsageError("variance_decomposition needs at least 2 kernels and 2 chains");
  }
  if (design.rows() != y.size()) {
    throw DataError("variance_decomposition: design/response mismatch");
  }

  const int k_count = n_kernels;
  const int m_count = chains_per_kernel;
  const double y_offset = y.mean();
  const Vector y_centered = y.array() - y_offset;

  VarianceDecomposition out;
  out.kernels = k_count;
  out.chains_per_kernel = m_count;
  out.r2.resize(k_count, m_count);

  auto chain_seed = [&](int k, int m) -> std::uint64_t {
    switch (cfg.seed_mode) {
      case VdSeedMode::PerCell:
        return mix_seed(cfg.base_seed, 1000003ULL * (k + 1) + m);
      case VdSeedMode::SharedWithinKernel:
        return mix_seed(cfg.base_seed, 1000003ULL * (k + 1));
      case VdSeedMode::SharedAcrossKernels:
        return mix_seed(cfg.base_seed, static_cast<std::uint64_t>(m) + 1);
      case VdSeedMode::AllShared:
        return mix_seed(cfg.base_seed, 0);
    }
    return cfg.base_seed;
  };

  parallel_for(k_count, cfg.threads, [&](Index k) {
    KernelSpec spec;
    spec.bandwidth = cfg.bandwidth;
    Matrix kernel_matrix;
    const Matrix* phi_ptr = nullptr;
    Matrix phi;
    if (cfg.exact_kernel) {
      spec.family = KernelFamily::GaussianExact;
      kernel_matrix = exact_kernel(design, spec);
    } else {
      spec.family = KernelFamily::GaussianRff;
      spec.feature_count = design.cols();
      spec.seed = mix_seed(cfg.base_seed, 777777ULL + static_cast<std::uint64_t>(k));
      const FourierFeatureMap fmap = sample_fourier_basis(design.cols(), spec);
      phi = feature_map(fmap, design);
      kernel_matrix = approx_kernel(phi);
      phi_ptr = &phi;
    }
    const KernelFactorization fact =
        factorize(kernel_matrix, cfg.variance_threshold, spec);
    const ProjectionOperator proj = build_projection(
        design, fact, cfg.projection, kDefaultPinvTolerance, phi_ptr);

    for (int m = 0; m < m_count; ++m) {
      SamplerConfig sampler = cfg.sampler;
      sampler.seed = chain_seed(static_cast<int>(k), m);
      const PosteriorChain chain = gibbs_fit(y_centered, fact, proj, cfg.hyper, sampler);
      const Vector beta_mean =
          chain.projection * chain.theta_draws.colwise().mean().transpose();
      const Vector y_hat = (design * beta_mean).array() + y_offset;
      out.r2(k, m) = r_squared(y, y_hat);
    }
  });

  const double grand = out.r2.mean();
  double ss_between = 0.0;
  double ss_within = 0.0;
  for (int k = 0; k < k_count; ++k) {
    const double group_mean = out.r2.row(k).mean();
    ss_between += (group_mean - grand) * (group_mean - grand);
    ss_within += (out.r2.row(k).array() - group_mean).square().sum();
  }
  const double ms_between =
      static_cast<double>(m_count) * ss_between / static_cast<double>(k_count - 1);
  const double ms_within =
      ss_within / static_cast<double>(k_count * (m_count - 1));
  const double between_component =
      std::max(0.0, (ms_between - ms_within) / static_cast<double>(m_count));
  const double within_component = ms_within;
  const double component_total = between_component + within_component;

  const Index runs = static_cast<Index>(k_count) * m_count;
  out.total_variance =
      (out.r2.array() - grand).square().sum() / static_cast<double>(runs - 1);

  if (component_total > 0.0) {
    out.between_kernel_proportion = between_component / component_total;
    out.within_chain_proportion = within_component / component_total;
  } else {
    out.degenerate = true;
  }
  return out;
}

}  // namespace bakr
