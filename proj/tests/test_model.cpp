#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>
#include <cmath>

#include "lqmf/errors.hpp"
#include "lqmf/model.hpp"
#include "test_util.hpp"

using namespace lqmf;
using testutil::benchmark_model;

namespace {
Mat scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

NoiseSuite unit_gaussian_noise(int d) {
  NoiseSuite n;
  n.eps0_init = NoiseSpec::gaussian(Vec::Zero(d), Mat::Identity(d, d));
  n.eps1_init = NoiseSpec::gaussian(Vec::Zero(d), Mat::Identity(d, d));
  n.eps0_step = NoiseSpec::gaussian(Vec::Zero(d), 0.01 * Mat::Identity(d, d));
  n.eps1_step = NoiseSpec::gaussian(Vec::Zero(d), 0.01 * Mat::Identity(d, d));
  return n;
}
}  // namespace

TEST_CASE("validate_model: scalar psd model passes") {
  MfcModel m = make_model(scalar(1), scalar(0), scalar(1), scalar(0), scalar(1), scalar(0),
                          scalar(1), scalar(0), 0.9, unit_gaussian_noise(1));
  const ValidationReport rep = validate_model(m);
  CHECK(rep.assumption1);
  CHECK(rep.assumption2);
}

TEST_CASE("validate_model: negative Q fails assumption 1 with its eigenvalue") {
  MfcModel m = make_model(scalar(1), scalar(0), scalar(1), scalar(0), scalar(-1), scalar(0),
                          scalar(1), scalar(0), 0.9, unit_gaussian_noise(1));
  const ValidationReport rep = validate_model(m);
  CHECK_FALSE(rep.assumption1);
  bool found = false;
  for (const auto& c : rep.checks)
    if (c.name == "assumption1.Q") {
      found = true;
      CHECK_FALSE(c.pass);
      CHECK(c.min_eigenvalue == doctest::Approx(-1.0));
    }
  CHECK(found);
}

TEST_CASE("validate_model: benchmark parameters pass all assumptions") {
  const ValidationReport rep = validate_model(benchmark_model());
  CHECK(rep.assumption1);
  CHECK(rep.assumption2);
}

TEST_CASE("validate_model: degenerate noise only downgrades assumption 2") {
  MfcModel m = benchmark_model();
  m.noise.eps0_step = NoiseSpec::degenerate(Vec::Zero(1));
  m.noise.eps0_init = NoiseSpec::degenerate(Vec::Zero(1));
  const ValidationReport rep = validate_model(m);
  CHECK(rep.assumption1);
  CHECK_FALSE(rep.assumption2);
}

TEST_CASE("validate_model: nonzero step-noise mean is rejected") {
  MfcModel m = benchmark_model();
  Vec mean(1), var(1);
  mean(0) = 0.1;
  Mat cov(1, 1);
  cov(0, 0) = 0.01;
  m.noise.eps1_step = NoiseSpec::gaussian(mean, cov);
  CHECK_FALSE(validate_model(m).assumption1);
}

TEST_CASE("make_model: gross asymmetry is a hard error, tiny asymmetry is folded") {
  Mat q(2, 2);
  q << 1.0, 0.2, 0.2 + 1e-12, 1.0;
  MfcModel ok = make_model(Mat::Identity(2, 2) * 0.3, Mat::Zero(2, 2), Mat::Identity(2, 2),
                           Mat::Zero(2, 2), q, Mat::Zero(2, 2), Mat::Identity(2, 2),
                           Mat::Zero(2, 2), 0.9, unit_gaussian_noise(2));
  CHECK(ok.Q(0, 1) == ok.Q(1, 0));

  Mat bad = q;
  bad(1, 0) += 1e-6;
  CHECK_THROWS_AS(make_model(Mat::Identity(2, 2) * 0.3, Mat::Zero(2, 2), Mat::Identity(2, 2),
                             Mat::Zero(2, 2), bad, Mat::Zero(2, 2), Mat::Identity(2, 2),
                             Mat::Zero(2, 2), 0.9, unit_gaussian_noise(2)),
                  ConfigError);
}

TEST_CASE("is_admissible: closed-loop arithmetic") {
  // a = b = 1, K = 1 kills the y loop entirely.
  MfcModel m = make_model(scalar(1), scalar(0), scalar(1), scalar(0), scalar(1), scalar(0),
                          scalar(1), scalar(0), 0.9, unit_gaussian_noise(1));
  CHECK(is_admissible(m, {scalar(1), scalar(1)}));

  // b = 0: admissibility depends on gamma * a^2 alone.
  MfcModel m2 = make_model(scalar(1), scalar(0), scalar(0), scalar(0), scalar(1), scalar(0),
                           scalar(1), scalar(0), 0.9, unit_gaussian_noise(1));
  CHECK(is_admissible(m2, {scalar(5), scalar(-3)}));  // 0.9 * 1 < 1 for any K
  MfcModel m3 = make_model(scalar(1.1), scalar(0), scalar(0), scalar(0), scalar(1), scalar(0),
                           scalar(1), scalar(0), 0.9, unit_gaussian_noise(1));
  CHECK_FALSE(is_admissible(m3, {scalar(0), scalar(0)}));  // 0.9 * 1.21 > 1
}

TEST_CASE("is_admissible: benchmark model is admissible at zero gains") {
  MfcModel m = benchmark_model();
  CHECK(is_admissible(m, zero_control(m)));
}

TEST_CASE("is_admissible: invariant under orthogonal conjugation") {
  // Rotating the state basis leaves the singular values of the closed loops
  // unchanged, so admissibility verdicts must match.
  RngStream rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2, ell = 2;
    MfcModel m = testutil::random_model(1000 + rep, d, ell);
    ControlParams theta{testutil::random_mat(ell, d, rng, 1.5),
                        testutil::random_mat(ell, d, rng, 1.5)};

    Eigen::HouseholderQR<Mat> qr(testutil::random_mat(d, d, rng));
    Mat U = qr.householderQ();
    MfcModel m2 = m;
    m2.A = U * m.A * U.transpose();
    m2.A_bar = U * m.A_bar * U.transpose();
    m2.B = U * m.B;
    m2.B_bar = U * m.B_bar;
    ControlParams theta2{theta.K * U.transpose(), theta.L * U.transpose()};
    CHECK(is_admissible(m, theta) == is_admissible(m2, theta2));
  }
}

TEST_CASE("augment: block structure and Gamma") {
  MfcModel m = benchmark_model();
  const AugmentedSystem s = augment(m, zero_control(m));
  CHECK(s.bA(0, 0) == doctest::Approx(0.5));
  CHECK(s.bA(1, 1) == doctest::Approx(1.0));
  CHECK(s.bA(0, 1) == 0.0);
  CHECK(s.bA(1, 0) == 0.0);
  CHECK((s.Gamma_theta - s.bQ).norm() == 0.0);  // K = L = 0

  // Against a dense recomputation for random theta.
  RngStream rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 2, ell = 2;
    MfcModel rm = testutil::random_model(2000 + rep, d, ell);
    ControlParams theta{testutil::random_mat(ell, d, rng), testutil::random_mat(ell, d, rng)};
    const AugmentedSystem a = augment(rm, theta);
    Mat bK = Mat::Zero(2 * ell, 2 * d);
    bK.topLeftCorner(ell, d) = theta.K;
    bK.bottomRightCorner(ell, d) = theta.L;
    const Mat dense = a.bQ + bK.transpose() * a.bR * bK;
    CHECK((a.Gamma_theta - dense).cwiseAbs().maxCoeff() < 1e-12);
    // symmetric psd under assumption 1
    CHECK((a.Gamma_theta - a.Gamma_theta.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(min_eig_sym(a.Gamma_theta) > -1e-10);
    // off blocks exactly zero
    CHECK(a.Gamma_theta.topRightCorner(d, d).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.bB.topRightCorner(d, ell).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("NoiseSpec: samplers match declared mean and covariance (1e6 draws)") {
  const long n = 1000000;
  Vec lo(2), hi(2);
  lo << -1.0, 0.0;
  hi << 1.0, 2.0;
  Mat cov(2, 2);
  cov << 0.5, 0.2, 0.2, 0.3;
  Vec mean(2);
  mean << 0.3, -0.7;

  for (const NoiseSpec& spec : {NoiseSpec::uniform(lo, hi), NoiseSpec::gaussian(mean, cov)}) {
    RngStream rng(11);
    Vec sum = Vec::Zero(2);
    Mat sum_sq = Mat::Zero(2, 2);  // accumulates centered products
    Mat sum_sq2 = Mat::Zero(2, 2);
    Vec sum2 = Vec::Zero(2);
    for (long i = 0; i < n; ++i) {
      const Vec x = spec.sample(rng);
      sum += x;
      const Vec c = x - spec.mean();
      sum_sq += c * c.transpose();
      sum_sq2 += (c * c.transpose()).cwiseAbs2();
      sum2 += x.cwiseAbs2();
    }
    const Vec emp_mean = sum / static_cast<double>(n);
    const Mat emp_cov = sum_sq / static_cast<double>(n);
    for (int i = 0; i < 2; ++i) {
      const double se = std::sqrt(spec.covariance()(i, i) / static_cast<double>(n));
      CHECK(std::abs(emp_mean(i) - spec.mean()(i)) < 4.0 * se);
      for (int j = 0; j < 2; ++j) {
        const double var_entry =
            sum_sq2(i, j) / static_cast<double>(n) - emp_cov(i, j) * emp_cov(i, j);
        const double se_cov = std::sqrt(std::max(var_entry, 0.0) / static_cast<double>(n));
        CHECK(std::abs(emp_cov(i, j) - spec.covariance()(i, j)) < 4.0 * se_cov + 1e-12);
      }
    }
  }
}

TEST_CASE("NoiseSpec: parameter validation") {
  Vec lo(1), hi(1);
  lo(0) = 1.0;
  hi(0) = -1.0;
  CHECK_THROWS_AS(NoiseSpec::uniform(lo, hi), ConfigError);
  Mat bad(1, 1);
  bad(0, 0) = -0.5;
  CHECK_THROWS_AS(NoiseSpec::gaussian(Vec::Zero(1), bad), ConfigError);
}

TEST_CASE("NoiseSuite: second moments carry nonzero initial means") {
  MfcModel m = benchmark_model();
  Vec v(1);
  v(0) = 0.5;
  m.noise.eps0_init = NoiseSpec::degenerate(v);  // z0 = 0.5 + E[eps1_0] = 0.5
  CHECK(m.noise.m_z0()(0, 0) == doctest::Approx(0.25));
  CHECK(m.noise.sigma_z0()(0, 0) == doctest::Approx(0.0));
  CHECK(m.noise.m_y0()(0, 0) == doctest::Approx(1.0 / 3.0));
}
