#include "bakr/model.hpp"

#include <algorithm>
#include <cmath>

#include "bakr/rng.hpp"
#include "bakr/stats.hpp"

namespace bakr {

void HyperParams::validate() const {
  if (!(nu > 0.0) || !(phi > 0.0)) {
    throw UsageError("hyperparameters nu and phi must be positive");
  }
}

void SamplerConfig::validate() const {
  if (total_iterations < 1 || burn_in < 0 || burn_in >= total_iterations) {
    throw UsageError("sampler requires 0 <= burn_in < total_iterations");
  }
  if (thin < 1) {
    throw UsageError("thinning stride must be >= 1");
  }
}

std::string to_string(ProjectionMode mode) {
  return mode == ProjectionMode::Collapsed ? "collapsed" : "composite";
}

ProjectionMode projection_mode_from_string(const std::string& name) {
  if (name == "collapsed") return ProjectionMode::Collapsed;
  if (name == "composite") return ProjectionMode::Composite;
  throw UsageError("unknown projection mode: " + name);
}

namespace {

// Thin SVD with small singular values zeroed; applies pinv(A) to a block
// without forming the full pseudoinverse.
struct PinvFactors {
  Matrix u;
  Matrix v;
  Vector inv_s;

  Matrix apply(const Matrix& rhs) const {
    return v * (inv_s.asDiagonal() * (u.transpose() * rhs));
  }
};

PinvFactors make_pinv(const Matrix& a, double tolerance) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  PinvFactors f;
  f.u = svd.matrixU();
  f.v = svd.matrixV();
  const Vector s = svd.singularValues();
  const double cutoff = s.size() > 0 ? tolerance * s(0) : 0.0;
  f.inv_s = (s.array() > cutoff).select(s.array().inverse(), 0.0);
  return f;
}

}  // namespace

ProjectionOperator build_projection(const Matrix& x, const KernelFactorization& fact,
                                    ProjectionMode mode, double tolerance,
                                    const Matrix* phi) {
  if (x.rows() != fact.u.rows()) {
    throw DataError("build_projection: X has " + std::to_string(x.rows()) +
                    " rows but the factorization has " + std::to_string(fact.u.rows()));
  }
  if (!(tolerance > 0.0)) {
    throw UsageError("pseudoinverse tolerance must be positive");
  }

  ProjectionOperator proj;
  proj.mode = mode;
  proj.tolerance = tolerance;
  const PinvFactors x_pinv = make_pinv(x, tolerance);

  if (mode == ProjectionMode::Collapsed) {
    proj.matrix = x_pinv.apply(fact.u);
    return proj;
  }

  if (phi == nullptr) {
    throw UsageError("composite projection requires the feature matrix; "
                     "unavailable for exact kernels");
  }
  if (phi->rows() != x.rows()) {
    throw DataError("build_projection: feature matrix row count mismatch");
  }

  const Matrix k = approx_kernel(*phi);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(k);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("build_projection: kernel eigendecomposition failed");
  }
  const Vector evals = solver.eigenvalues();
  const double floor = 1e-10 * evals(evals.size() - 1);
  if (!(evals(0) > floor) || !(evals(0) > 0.0)) {
    throw NumericalError("build_projection: approximate kernel is singular "
                         "after eigenvalue flooring");
  }
  const Matrix kinv_phi =
      solver.eigenvectors() *
      (evals.cwiseInverse().asDiagonal() * (solver.eigenvectors().transpose() * *phi));
  const Matrix chain = fact.lambda.asDiagonal() * (fact.u.transpose() * kinv_phi);
  const PinvFactors chain_pinv = make_pinv(chain, tolerance);
  proj.matrix = x_pinv.apply(*phi * chain_pinv.apply(Matrix::Identity(
      fact.q(), fact.q())));
  return proj;
}

PosteriorChain gibbs_fit(const Vector& y, const KernelFactorization& fact,
                         const ProjectionOperator& proj, const HyperParams& hp,
                         const SamplerConfig& cfg) {
  hp.validate();
  cfg.validate();
  const Index n = y.size();
  const Index q = fact.q();
  if (q < 1) {
    throw NumericalError("gibbs_fit: factorization has no retained factors");
  }
  if (!y.allFinite()) {
    throw DataError("gibbs_fit: response contains non-finite values");
  }
  if (fact.u.rows() != n) {
    throw DataError("gibbs_fit: response length does not match the factorization");
  }
  if ((fact.lambda.array() <= 0.0).any()) {
    throw NumericalError("gibbs_fit: factorization holds a nonpositive eigenvalue");
  }
  if (proj.matrix.cols() != q) {
    throw DataError("gibbs_fit: projection width does not match the factorization");
  }
  if (cfg.fixed_theta && cfg.fixed_theta->size() != q) {
    throw UsageError("gibbs_fit: fixed_theta has the wrong length");
  }

  const Vector uty = fact.u.transpose() * y;
  const double yty = y.squaredNorm();
  const Vector& lambda = fact.lambda;
  const double nu = hp.nu;
  const double nuphi = hp.nu * hp.phi;

  const Index retained = cfg.retained();
  PosteriorChain chain;
  chain.theta_draws.resize(retained, q);
  chain.sigma2_draws.resize(retained);
  chain.tau2_draws.resize(retained);
  chain.projection = proj.matrix;
  chain.info.kernel = fact.source;
  chain.info.hyper = hp;
  chain.info.sampler = cfg;
  chain.info.projection_mode = proj.mode;
  chain.info.n = n;

  Rng rng(cfg.seed);
  Vector theta = Vector::Zero(q);
  double sigma2 = cfg.fixed_sigma2.value_or(1.0);
  double tau2 = cfg.fixed_tau2.value_or(1.0);

  Index stored = 0;
  for (int t = 0; t < cfg.total_iterations; ++t) {
    if (cfg.fixed_theta) {
      theta = *cfg.fixed_theta;
    } else {
      for (Index i = 0; i < q; ++i) {
        const double denom = tau2 + sigma2 * lambda(i);
        const double v = tau2 * sigma2 * lambda(i) / denom;
        const double m = sigma2 * lambda(i) * uty(i) / denom;
        theta(i) = m + std::sqrt(v) * rng.normal();
      }
    }

    if (!cfg.fixed_sigma2) {
      const double quad = (theta.array().square() / lambda.array()).sum();
      sigma2 = rng.scaled_inv_chi_squared(nu + q, (nuphi + quad) / (nu + q));
    }

    if (!cfg.fixed_tau2) {
      // e'e through U'U = I: |y - U theta|^2 = y'y - 2 theta'U'y + theta'theta.
      const double ee =
          std::max(0.0, yty - 2.0 * theta.dot(uty) + theta.squaredNorm());
      tau2 = rng.scaled_inv_chi_squared(nu + n, (nuphi + ee) / (nu + n));
    }

    if (!std::isfinite(sigma2) || !std::isfinite(tau2) || !theta.allFinite()) {
      throw NumericalError("gibbs_fit: non-finite draw at iteration " +
                           std::to_string(t));
    }

    if (t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
      chain.theta_draws.row(stored) = theta.transpose();
      chain.sigma2_draws(stored) = sigma2;
      chain.tau2_draws(stored) = tau2;
      ++stored;
    }
  }
  return chain;
}

PosteriorSummary posterior_summary(const PosteriorChain& chain) {
  const Index t_count = chain.draw_count();
  if (t_count < 1) {
    throw UsageError("posterior_summary: empty chain");
  }

  PosteriorSummary s;
  s.theta_mean = chain.theta_draws.colwise().mean();
  s.beta_mean = chain.projection * s.theta_mean;
  s.sigma2_mean = chain.sigma2_draws.mean();
  s.tau2_mean = chain.tau2_draws.mean();

  // sd over beta draws without materializing them: beta covariance is
  // P cov(theta) P', and only its diagonal is needed.
  const Matrix centered = chain.theta_draws.rowwise() - s.theta_mean.transpose();
  const Matrix theta_cov =
      centered.transpose() * centered / static_cast<double>(t_count);
  const Matrix pc = chain.projection * theta_cov;
  s.beta_sd = pc.cwiseProduct(chain.projection).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
  return s;
}

Predictions predict(const Matrix& x_star, const PosteriorChain& chain,
                    const std::vector<double>& levels) {
  if (x_star.cols() != chain.covariate_count()) {
    throw DataError("predict: X* has " + std::to_string(x_star.cols()) +
                    " columns, chain expects " +
                    std::to_string(chain.covariate_count()));
  }
  if (chain.draw_count() < 1) {
    throw UsageError("predict: empty chain");
  }
  for (double level : levels) {
    if (!(level > 0.0) || !(level < 1.0)) {
      throw UsageError("interval levels must lie in (0, 1)");
    }
  }

  const Index n_star = x_star.rows();
  const Index t_count = chain.draw_count();
  const Matrix a = x_star * chain.projection;  // n* x q

  Predictions out;
  out.levels = levels;
  out.draws = chain.theta_draws * a.transpose();
  out.draws.array() += chain.info.y_offset;
  out.mean = out.draws.colwise().mean();

  const Index n_levels = static_cast<Index>(levels.size());
  out.lower.resize(n_star, n_levels);
  out.upper.resize(n_star, n_levels);
  std::vector<double> column(t_count);
  for (Index i = 0; i < n_star; ++i) {
    for (Index t = 0; t < t_count; ++t) column[t] = out.draws(t, i);
    std::sort(column.begin(), column.end());
    for (Index l = 0; l < n_levels; ++l) {
      const double alpha = 1.0 - levels[l];
      out.lower(i, l) = quantile_sorted(column, alpha / 2.0);
      out.upper(i, l) = quantile_sorted(column, 1.0 - alpha / 2.0);
    }
  }
  return out;
}

}  // namespace bakr
