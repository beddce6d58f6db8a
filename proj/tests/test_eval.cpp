#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bakr/data.hpp"
#include "bakr/eval.hpp"
#include "bakr/rng.hpp"

using namespace bakr;

TEST_CASE("mspe") {
  Vector y(4);
  y << 1.0, 2.0, 3.0, 4.0;
  CHECK(mspe(y, y) == 0.0);
  CHECK(mspe(y, y.array() + 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mspe(y, Vector::Zero(3)), DataError);
  CHECK_THROWS_AS(mspe(Vector(), Vector()), UsageError);
}

TEST_CASE("r squared") {
  Vector y(5);
  y << 1.0, 2.0, 3.0, 4.0, 10.0;
  CHECK(r_squared(y, y) == doctest::Approx(1.0));
  CHECK(r_squared(y, Vector::Constant(5, y.mean())) == doctest::Approx(0.0));
  CHECK_THROWS_AS(r_squared(Vector::Ones(4), Vector::Ones(4)), UsageError);

  SUBCASE("identity with mspe on the same evaluation set") {
    Rng rng(3);
    Vector noise(5), y_hat(5);
    for (Index i = 0; i < 5; ++i) y_hat(i) = y(i) + rng.normal();
    const double sst = (y.array() - y.mean()).square().sum();
    const double identity = 1.0 - mspe(y, y_hat) * 5.0 / sst;
    CHECK(r_squared(y, y_hat) == doctest::Approx(identity).epsilon(1e-12));
  }
}

TEST_CASE("power curve") {
  SUBCASE("perfect ranking reaches full power at zero false positives") {
    Vector mags(6);
    mags << 9.0, 5.0, 4.0, 0.3, 0.2, 0.1;
    const PowerCurve curve = power_curve(mags, {0, 1, 2});
    CHECK(curve.auc == doctest::Approx(1.0));
    CHECK(curve.tpr[3] == doctest::Approx(1.0));
    CHECK(curve.fpr[3] == doctest::Approx(0.0));
    CHECK(curve.tpr.back() == doctest::Approx(1.0));
    CHECK(curve.fpr.back() == doctest::Approx(1.0));
  }

  SUBCASE("curves are monotone step functions") {
    Rng rng(7);
    Vector mags(40);
    for (Index j = 0; j < 40; ++j) mags(j) = std::abs(rng.normal());
    const PowerCurve curve = power_curve(mags, {3, 11, 19, 33});
    for (std::size_t k = 1; k < curve.tpr.size(); ++k) {
      CHECK(curve.tpr[k] >= curve.tpr[k - 1]);
      CHECK(curve.fpr[k] >= curve.fpr[k - 1]);
    }
    CHECK(curve.auc >= 0.0);
    CHECK(curve.auc <= 1.0);
  }

  SUBCASE("ties break by ascending covariate index") {
    Vector mags = Vector::Ones(4);
    const PowerCurve curve = power_curve(mags, {2});
    CHECK(curve.ranking == std::vector<Index>{0, 1, 2, 3});
  }

  SUBCASE("random rankings hover near AUC one half") {
    Rng rng(11);
    const int reps = 200;
    const Index p = 60;
    std::vector<Index> truth;
    for (Index j = 0; j < 12; ++j) truth.push_back(j * 5);
    double sum = 0.0, sum_sq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      Vector mags(p);
      for (Index j = 0; j < p; ++j) mags(j) = rng.uniform();
      const double auc = power_curve(mags, truth).auc;
      sum += auc;
      sum_sq += auc * auc;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt(sum_sq / reps - mean * mean);
    CHECK(std::abs(mean - 0.5) < 3.0 * sd / std::sqrt(double(reps)));
  }

  SUBCASE("validation") {
    Vector mags = Vector::Ones(4);
    CHECK_THROWS_AS(power_curve(mags, {}), UsageError);
    CHECK_THROWS_AS(power_curve(mags, {7}), UsageError);
    CHECK_THROWS_AS(power_curve(mags, {0, 1, 2, 3}), UsageError);
  }
}

namespace {

struct VdSetup {
  Matrix design;
  Vector y;
};

VdSetup vd_setup(Index n, Index p, std::uint64_t seed) {
  const SimulatedDataset ds = simulate_polynomial(n, p, p / 4, seed);
  return {ds.x.values / std::sqrt(double(p)), ds.y};
}

VarianceDecompositionConfig vd_config() {
  VarianceDecompositionConfig cfg;
  cfg.sampler.total_iterations = 400;
  cfg.sampler.burn_in = 200;
  cfg.base_seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("variance decomposition seed modes force the expected splits") {
  const VdSetup setup = vd_setup(40, 24, 5);

  SUBCASE("identical chain seeds within a kernel leave no within variance") {
    VarianceDecompositionConfig cfg = vd_config();
    cfg.seed_mode = VdSeedMode::SharedWithinKernel;
    const VarianceDecomposition vd =
        variance_decomposition(setup.design, setup.y, 3, 3, cfg);
    CHECK(vd.between_kernel_proportion == doctest::Approx(1.0));
    CHECK(vd.within_chain_proportion == doctest::Approx(0.0));
    for (int k = 0; k < 3; ++k) {
      CHECK(vd.r2(k, 0) == vd.r2(k, 1));
      CHECK(vd.r2(k, 0) == vd.r2(k, 2));
    }
  }

  SUBCASE("exact kernel with shared chain seeds has no between variance") {
    VarianceDecompositionConfig cfg = vd_config();
    cfg.exact_kernel = true;
    cfg.seed_mode = VdSeedMode::SharedAcrossKernels;
    const VarianceDecomposition vd =
        variance_decomposition(setup.design, setup.y, 3, 3, cfg);
    CHECK(vd.between_kernel_proportion == doctest::Approx(0.0));
    CHECK(vd.within_chain_proportion == doctest::Approx(1.0));
    CHECK(vd.r2.row(0) == vd.r2.row(1));
  }

  SUBCASE("fully shared seeds degenerate to zero total variance") {
    VarianceDecompositionConfig cfg = vd_config();
    cfg.exact_kernel = true;
    cfg.seed_mode = VdSeedMode::AllShared;
    const VarianceDecomposition vd =
        variance_decomposition(setup.design, setup.y, 2, 2, cfg);
    CHECK(vd.degenerate);
    CHECK(vd.total_variance == 0.0);
    CHECK(vd.between_kernel_proportion == 0.0);
    CHECK(vd.within_chain_proportion == 0.0);
  }

  SUBCASE("independent cells give proportions that sum to one") {
    VarianceDecompositionConfig cfg = vd_config();
    const VarianceDecomposition vd =
        variance_decomposition(setup.design, setup.y, 4, 3, cfg);
    CHECK_FALSE(vd.degenerate);
    CHECK(vd.between_kernel_proportion + vd.within_chain_proportion ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(vd.between_kernel_proportion >= 0.0);
    CHECK(vd.within_chain_proportion >= 0.0);
    CHECK(vd.total_variance > 0.0);
    CHECK(vd.r2.rows() == 4);
    CHECK(vd.r2.cols() == 3);
  }

  SUBCASE("threading does not change the result") {
    VarianceDecompositionConfig cfg = vd_config();
    const VarianceDecomposition a =
        variance_decomposition(setup.design, setup.y, 3, 2, cfg);
    cfg.threads = 3;
    const VarianceDecomposition b =
        variance_decomposition(setup.design, setup.y, 3, 2, cfg);
    CHECK(a.r2 == b.r2);
  }

  SUBCASE("grid bounds are validated") {
    VarianceDecompositionConfig cfg = vd_config();
    CHECK_THROWS_AS(variance_decomposition(setup.design, setup.y, 1, 3, cfg),
                    UsageError);
    CHECK_THROWS_AS(variance_decomposition(setup.design, setup.y, 3, 1, cfg),
                    UsageError);
  }
}
