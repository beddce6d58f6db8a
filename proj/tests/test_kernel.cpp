#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bakr/kernel.hpp"
#include "bakr/rng.hpp"

using namespace bakr;

namespace {

KernelSpec rff_spec(double h, Index d, std::uint64_t seed) {
  KernelSpec spec;
  spec.family = KernelFamily::GaussianRff;
  spec.bandwidth = h;
  spec.feature_count = d;
  spec.seed = seed;
  return spec;
}

// Independent oracle: straightforward entrywise Gaussian kernel, no Gram
// shortcut.
Matrix exact_gaussian_oracle(const Matrix& x, double h) {
  const Index n = x.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double dist2 = 0.0;
      for (Index c = 0; c < x.cols(); ++c) {
        const double diff = x(i, c) - x(j, c);
        dist2 += diff * diff;
      }
      k(i, j) = std::exp(-h * dist2);
    }
  }
  return k;
}

Matrix random_design(Index n, Index p, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      x(i, j) = scale * rng.normal();
    }
  }
  return x;
}

double mean_abs_error(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().mean();
}

}  // namespace

TEST_CASE("fourier basis is deterministic given the seed") {
  const KernelSpec spec = rff_spec(1.0, 4, 7);
  const FourierFeatureMap a = sample_fourier_basis(3, spec);
  const FourierFeatureMap b = sample_fourier_basis(3, spec);
  CHECK(a.omega.rows() == 3);
  CHECK(a.omega.cols() == 4);
  CHECK(a.phase.size() == 4);
  CHECK(a.omega == b.omega);
  CHECK(a.phase == b.phase);

  const FourierFeatureMap c = sample_fourier_basis(3, rff_spec(1.0, 4, 8));
  CHECK(a.omega != c.omega);
}

TEST_CASE("fourier basis rejects invalid specs") {
  CHECK_THROWS_AS(sample_fourier_basis(3, rff_spec(-1.0, 4, 0)), UsageError);
  CHECK_THROWS_AS(sample_fourier_basis(3, rff_spec(0.0, 4, 0)), UsageError);
  CHECK_THROWS_AS(sample_fourier_basis(3, rff_spec(1.0, 0, 0)), UsageError);
  KernelSpec exact;
  exact.family = KernelFamily::GaussianExact;
  CHECK_THROWS_AS(sample_fourier_basis(3, exact), UsageError);
}

TEST_CASE("frequency moments match the spectral density") {
  // Entry variance must be 2h; law of large numbers over 10^6 draws.
  const FourierFeatureMap fmap = sample_fourier_basis(1, rff_spec(0.5, 1000000, 11));
  const double mean = fmap.omega.mean();
  const double var = (fmap.omega.array() - mean).square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));

  // Column norms concentrate: E|omega_l|^2 = p * 2h.
  const FourierFeatureMap wide = sample_fourier_basis(2000, rff_spec(2.0, 2000, 13));
  const double mean_norm2 = wide.omega.colwise().squaredNorm().mean();
  CHECK(mean_norm2 == doctest::Approx(2000.0 * 2.0 * 2.0).epsilon(0.05));

  for (Index l = 0; l < wide.phase.size(); ++l) {
    CHECK(wide.phase(l) >= 0.0);
    CHECK(wide.phase(l) < 2.0 * M_PI);
  }
}

TEST_CASE("feature map evaluates the cosine basis") {
  SUBCASE("zero input and zero phase hit cos(0)") {
    FourierFeatureMap fmap;
    fmap.spec = rff_spec(1.0, 6, 0);
    fmap.omega = Matrix::Random(4, 6);
    fmap.phase = Vector::Zero(6);
    const Matrix phi = feature_map(fmap, Matrix::Zero(3, 4));
    const double expected = std::sqrt(2.0 / 6.0);
    CHECK((phi.array() - expected).abs().maxCoeff() < 1e-15);
  }

  SUBCASE("single feature matches the closed form") {
    FourierFeatureMap fmap;
    fmap.spec = rff_spec(1.0, 1, 0);
    fmap.omega = Matrix::Zero(3, 1);
    fmap.omega(0, 0) = 1.0;
    fmap.phase = Vector::Constant(1, M_PI / 2.0);
    Matrix x(1, 3);
    x << 0.37, -2.0, 5.0;
    const Matrix phi = feature_map(fmap, x);
    CHECK(phi(0, 0) ==
          doctest::Approx(std::sqrt(2.0) * std::cos(0.37 + M_PI / 2.0)));
  }

  SUBCASE("entries stay within the envelope") {
    const FourierFeatureMap fmap = sample_fourier_basis(5, rff_spec(1.5, 64, 3));
    const Matrix phi = feature_map(fmap, random_design(20, 5, 4));
    CHECK(phi.cwiseAbs().maxCoeff() <= std::sqrt(2.0 / 64.0) + 1e-15);
  }

  SUBCASE("dimension mismatch throws") {
    const FourierFeatureMap fmap = sample_fourier_basis(5, rff_spec(1.0, 8, 3));
    CHECK_THROWS_AS(feature_map(fmap, Matrix::Zero(2, 4)), DataError);
  }
}

TEST_CASE("approximate kernel tracks the exact kernel") {
  // Rows scaled by 1/sqrt(p) keep squared distances O(1) so the kernel has
  // a non-degenerate range to match.
  const Index n = 50;
  const Index p = 20;
  const Matrix x = random_design(n, p, 21, 1.0 / std::sqrt(double(p)));
  const Matrix k_exact = exact_gaussian_oracle(x, 1.0);

  const FourierFeatureMap fmap = sample_fourier_basis(p, rff_spec(1.0, 20000, 5));
  const Matrix phi = feature_map(fmap, x);
  const Matrix k_approx = approx_kernel(phi);

  CHECK((k_approx - k_approx.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k_exact - k_approx).cwiseAbs().maxCoeff() < 0.05);
  CHECK(k_approx.diagonal().minCoeff() > 0.0);
  CHECK(k_approx.diagonal().maxCoeff() < 2.0);

  SUBCASE("identical rows give identical kernel entries") {
    Matrix xx = x;
    xx.row(3) = xx.row(7);
    const Matrix kk = approx_kernel(feature_map(fmap, xx));
    CHECK(kk(3, 7) == doctest::Approx(kk(3, 3)).epsilon(1e-12));
    CHECK(kk(3, 7) == doctest::Approx(kk(7, 7)).epsilon(1e-12));
  }
}

TEST_CASE("monte carlo error shrinks like 1/sqrt(d)") {
  const Index n = 60;
  const Index p = 30;
  const Matrix x = random_design(n, p, 33, 1.0 / std::sqrt(double(p)));
  const Matrix k_exact = exact_gaussian_oracle(x, 1.0);

  auto avg_error = [&](Index d, int reps, std::uint64_t seed0) {
    double total = 0.0;
    for (int r = 0; r < reps; ++r) {
      const FourierFeatureMap fmap =
          sample_fourier_basis(p, rff_spec(1.0, d, seed0 + r));
      total += mean_abs_error(k_exact, approx_kernel(feature_map(fmap, x)));
    }
    return total / reps;
  };

  SUBCASE("halving d inflates the error by about sqrt(2)") {
    const double err_full = avg_error(1000, 20, 100);
    const double err_half = avg_error(500, 20, 200);
    const double ratio = err_half / err_full;
    CHECK(ratio > 1.25);
    CHECK(ratio < 1.60);
  }

  SUBCASE("log-log slope sits near -1/2") {
    const std::vector<Index> ds = {250, 1000, 4000};
    std::vector<double> log_d, log_err;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      log_d.push_back(std::log(double(ds[i])));
      log_err.push_back(std::log(avg_error(ds[i], 10, 300 + 50 * i)));
    }
    const double mean_x = (log_d[0] + log_d[1] + log_d[2]) / 3.0;
    const double mean_y = (log_err[0] + log_err[1] + log_err[2]) / 3.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      num += (log_d[i] - mean_x) * (log_err[i] - mean_y);
      den += (log_d[i] - mean_x) * (log_d[i] - mean_x);
    }
    const double slope = num / den;
    CHECK(slope > -0.6);
    CHECK(slope < -0.4);
  }
}

TEST_CASE("approximate kernel is unbiased for the exact kernel") {
  const Index n = 6;
  const Index p = 4;
  const Index d = 50;
  const int reps = 200;
  const Matrix x = random_design(n, p, 55, 0.5);
  const Matrix k_exact = exact_gaussian_oracle(x, 1.0);

  Matrix mean_k = Matrix::Zero(n, n);
  for (int r = 0; r < reps; ++r) {
    const FourierFeatureMap fmap = sample_fourier_basis(p, rff_spec(1.0, d, 900 + r));
    mean_k += approx_kernel(feature_map(fmap, x));
  }
  mean_k /= reps;

  const double bound = 3.0 * 2.0 / std::sqrt(double(reps) * double(d));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      CHECK(std::abs(mean_k(i, j) - k_exact(i, j)) < bound);
    }
  }
}

TEST_CASE("approximate kernel stays numerically PSD") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Index d = 8 + 11 * seed;
    const FourierFeatureMap fmap = sample_fourier_basis(6, rff_spec(0.7, d, seed));
    const Matrix k = approx_kernel(feature_map(fmap, random_design(25, 6, seed + 40)));
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("exact kernels") {
  const Matrix x = random_design(10, 6, 77);

  SUBCASE("gaussian diagonal is exactly one") {
    KernelSpec spec;
    spec.family = KernelFamily::GaussianExact;
    spec.bandwidth = 0.8;
    const Matrix k = exact_kernel(x, spec);
    CHECK((k.diagonal().array() == 1.0).all());
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("two points at distance one") {
    Matrix two(2, 3);
    two << 0.0, 0.0, 0.0, 1.0, 0.0, 0.0;
    KernelSpec spec;
    spec.family = KernelFamily::GaussianExact;
    spec.bandwidth = 2.0;
    const Matrix k = exact_kernel(two, spec);
    CHECK(k(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  }

  SUBCASE("linear kernel on orthogonal rows") {
    Matrix ortho = Matrix::Zero(3, 6);
    ortho(0, 0) = 1.0;
    ortho(1, 1) = 1.0;
    ortho(2, 2) = 1.0;
    KernelSpec spec;
    spec.family = KernelFamily::LinearExact;
    const Matrix k = exact_kernel(ortho, spec);
    CHECK(std::abs(k(0, 1)) < 1e-15);
    CHECK(std::abs(k(0, 2)) < 1e-15);
    CHECK(k(0, 0) == doctest::Approx(1.0 / 6.0));
  }

  SUBCASE("rff family is rejected") {
    CHECK_THROWS_AS(exact_kernel(x, rff_spec(1.0, 4, 0)), UsageError);
  }
}

TEST_CASE("factorize truncates the spectrum by cumulative variance") {
  SUBCASE("identity kernel keeps ceil(threshold * n) factors") {
    const Index n = 40;
    const KernelFactorization fact = factorize(Matrix::Identity(n, n), 0.95);
    CHECK(fact.q() == Index(std::ceil(0.95 * n)));
    CHECK((fact.lambda.array() == 1.0).all());
  }

  SUBCASE("rank-one kernel keeps a single factor") {
    Vector v = Vector::LinSpaced(12, 1.0, 3.0);
    const Matrix k = v * v.transpose();
    for (double threshold : {0.1, 0.5, 1.0}) {
      const KernelFactorization fact = factorize(k, threshold);
      CHECK(fact.q() == 1);
      CHECK(fact.lambda(0) == doctest::Approx(v.squaredNorm()));
    }
  }

  SUBCASE("full threshold reconstructs the kernel") {
    const Matrix a = random_design(100, 100, 91);
    const Matrix k = approx_kernel(a);  // random PSD
    const KernelFactorization fact = factorize(k, 1.0);
    const Matrix rebuilt = fact.u * fact.lambda.asDiagonal() * fact.u.transpose();
    CHECK((k - rebuilt).norm() / k.norm() < 1e-8);
    CHECK((fact.u.transpose() * fact.u - Matrix::Identity(fact.q(), fact.q()))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }

  SUBCASE("eigenvalues are positive and descending") {
    const Matrix a = random_design(30, 8, 17);
    const KernelFactorization fact = factorize(approx_kernel(a), 0.9);
    for (Index i = 1; i < fact.q(); ++i) {
      CHECK(fact.lambda(i) <= fact.lambda(i - 1));
    }
    CHECK(fact.lambda.minCoeff() > 0.0);
    CHECK(fact.variance_explained >= 0.9);
  }

  SUBCASE("refactorizing the reconstruction is idempotent") {
    // At threshold 1 the reconstruction carries exactly the retained
    // spectrum, so refactorizing reproduces it. At lower thresholds the
    // retained eigenvalues still match as a prefix, but q contracts because
    // the truncated mass no longer counts toward the total.
    const Matrix a = random_design(40, 40, 19);
    const KernelFactorization fact = factorize(approx_kernel(a), 0.8);
    const Matrix rebuilt = fact.u * fact.lambda.asDiagonal() * fact.u.transpose();

    const KernelFactorization full = factorize(rebuilt, 1.0);
    CHECK(full.q() == fact.q());
    CHECK((full.lambda - fact.lambda).cwiseAbs().maxCoeff() < 1e-8);

    const KernelFactorization again = factorize(rebuilt, 0.8);
    CHECK(again.q() <= fact.q());
    CHECK((again.lambda - fact.lambda.head(again.q())).cwiseAbs().maxCoeff() <
          1e-8);
  }

  SUBCASE("asymmetric input is rejected") {
    Matrix bad = Matrix::Identity(5, 5);
    bad(0, 4) = 0.5;
    CHECK_THROWS_AS(factorize(bad, 0.9), NumericalError);
  }

  SUBCASE("threshold out of range is rejected") {
    CHECK_THROWS_AS(factorize(Matrix::Identity(4, 4), 0.0), UsageError);
    CHECK_THROWS_AS(factorize(Matrix::Identity(4, 4), 1.5), UsageError);
  }
}

TEST_CASE("approximation error metrics") {
  SUBCASE("identical input gives zeros") {
    const Matrix k = Matrix::Identity(6, 6);
    const ApproximationError err = approximation_error(k, k);
    CHECK(err.frobenius_rel == 0.0);
    CHECK(err.max_abs == 0.0);
    CHECK(err.mean_abs == 0.0);
  }

  SUBCASE("shifted identity has closed-form metrics") {
    const Matrix k_exact = Matrix::Identity(10, 10);
    const Matrix k_approx = 1.1 * Matrix::Identity(10, 10);
    const ApproximationError err = approximation_error(k_exact, k_approx);
    CHECK(err.frobenius_rel == doctest::Approx(0.1));
    CHECK(err.max_abs == doctest::Approx(0.1));
    CHECK(err.mean_abs == doctest::Approx(0.1 * 10.0 / 100.0));
  }

  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(
        approximation_error(Matrix::Identity(3, 3), Matrix::Identity(4, 4)),
        DataError);
  }
}

TEST_CASE("pipeline determinism end to end") {
  const Matrix x = random_design(15, 10, 123);
  const KernelSpec spec = rff_spec(1.2, 32, 99);
  const Matrix phi_a = feature_map(sample_fourier_basis(10, spec), x);
  const Matrix phi_b = feature_map(sample_fourier_basis(10, spec), x);
  CHECK(phi_a == phi_b);
  CHECK(approx_kernel(phi_a) == approx_kernel(phi_b));
}
