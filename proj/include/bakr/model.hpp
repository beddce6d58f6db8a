#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bakr/common.hpp"
#include "bakr/kernel.hpp"

namespace bakr {

// Shared scaled-inverse-chi-squared hyperparameters for sigma^2 and tau^2.
struct HyperParams {
  double nu = 5.0;
  double phi = 0.4;

  void validate() const;
};

struct SamplerConfig {
  int total_iterations = 50000;
  int burn_in = 25000;
  int thin = 1;
  std::uint64_t seed = 0;

  // Validation hooks: hold a block fixed so the conditional updates of the
  // remaining blocks can be checked against their closed forms.
  std::optional<double> fixed_sigma2;
  std::optional<double> fixed_tau2;
  std::optional<Vector> fixed_theta;

  int retained() const {
    return (total_iterations - burn_in + thin - 1) / thin;
  }
  void validate() const;
};

enum class ProjectionMode { Collapsed, Composite };

std::string to_string(ProjectionMode mode);
ProjectionMode projection_mode_from_string(const std::string& name);

// Linear map from factor coefficients theta to effect size analogs beta.
// Collapsed mode: P = pinv(X) U. Composite mode follows the factor-model
// chain of maps, P = pinv(X) Phi pinv(Lambda U' Kinv Phi); the two agree
// whenever no spectrum is truncated.
struct ProjectionOperator {
  Matrix matrix;  // p x q
  ProjectionMode mode = ProjectionMode::Collapsed;
  double tolerance = 0.0;
};

// sqrt(machine epsilon); singular values below tolerance * s_max are
// treated as zero in every pseudoinverse.
inline constexpr double kDefaultPinvTolerance = 1.4901161193847656e-08;

ProjectionOperator build_projection(const Matrix& x, const KernelFactorization& fact,
                                    ProjectionMode mode = ProjectionMode::Collapsed,
                                    double tolerance = kDefaultPinvTolerance,
                                    const Matrix* phi = nullptr);

// Provenance carried with the retained draws so prediction and association
// can run without refitting.
struct ChainInfo {
  KernelSpec kernel;
  double variance_threshold = 0.95;
  HyperParams hyper;
  SamplerConfig sampler;
  ProjectionMode projection_mode = ProjectionMode::Collapsed;
  double y_offset = 0.0;  // training mean added back by predict()
  Index n = 0;            // training sample count
};

struct PosteriorChain {
  Matrix theta_draws;   // T x q
  Vector sigma2_draws;  // T
  Vector tau2_draws;    // T
  Matrix projection;    // p x q
  ChainInfo info;

  Index draw_count() const { return theta_draws.rows(); }
  Index factor_count() const { return theta_draws.cols(); }
  Index covariate_count() const { return projection.rows(); }

  // beta(t) = P theta(t), a deterministic map of the stored draws.
  Vector beta_draw(Index t) const { return projection * theta_draws.row(t).transpose(); }
  Matrix beta_draws() const { return theta_draws * projection.transpose(); }
};

// Runs the closed-form Gibbs sweep: theta | sigma^2, tau^2, y from its
// conjugate normal; sigma^2 and tau^2 from scaled-inverse-chi-squared
// conditionals. Draws are retained after burn-in at the thinning stride.
PosteriorChain gibbs_fit(const Vector& y, const KernelFactorization& fact,
                         const ProjectionOperator& proj, const HyperParams& hp,
                         const SamplerConfig& cfg);

struct PosteriorSummary {
  Vector beta_mean;
  Vector beta_sd;
  Vector theta_mean;
  double sigma2_mean = 0.0;
  double tau2_mean = 0.0;
};

PosteriorSummary posterior_summary(const PosteriorChain& chain);

struct Predictions {
  Matrix draws;  // T x n_star
  Vector mean;   // n_star
  Matrix lower;  // n_star x levels
  Matrix upper;  // n_star x levels
  std::vector<double> levels;
};

// Posterior predictive through the effect size analogs: draw t predicts
// X* beta(t) (+ the training offset). Equal-tailed intervals per level.
Predictions predict(const Matrix& x_star, const PosteriorChain& chain,
                    const std::vector<double>& levels = {0.95});

}  // namespace bakr
