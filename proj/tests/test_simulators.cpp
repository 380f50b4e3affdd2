#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lqmf/analytic.hpp"
#include "lqmf/errors.hpp"
#include "lqmf/finite_agent.hpp"
#include "lqmf/simulators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lqmf;
using testutil::benchmark_model;

namespace {
Mat scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

MfcModel deterministic_model(double z0_value) {
  MfcModel m = benchmark_model();
  Vec c(1);
  c(0) = z0_value;
  m.noise.eps0_init = NoiseSpec::degenerate(c);
  m.noise.eps1_init = NoiseSpec::degenerate(Vec::Zero(1));
  m.noise.eps0_step = NoiseSpec::degenerate(Vec::Zero(1));
  m.noise.eps1_step = NoiseSpec::degenerate(Vec::Zero(1));
  return m;
}

// z-part of the deterministic cost: z_{t+1} = Dz z_t, z_0 = c.
double deterministic_z_cost(const MfcModel& m, const ControlParams& theta, double c, int T) {
  const double dz = m.closed_loop_z(theta.L)(0, 0);
  const double gz =
      (m.Q + m.Q_bar + theta.L.transpose() * (m.R + m.R_bar) * theta.L)(0, 0);
  double z = c, acc = 0.0, disc = 1.0;
  for (int t = 0; t < T; ++t) {
    acc += disc * gz * z * z;
    disc *= m.gamma;
    z *= dz;
  }
  return acc;
}
}  // namespace

TEST_CASE("mkv_rollout: deterministic noise reproduces the closed form") {
  MfcModel m = deterministic_model(0.8);
  const ControlParams theta{scalar(0.2), scalar(0.4)};
  const CostSample s = mkv_rollout(m, theta, 30, RngStream(5));
  CHECK(s.value == doctest::Approx(deterministic_z_cost(m, theta, 0.8, 30)).epsilon(1e-12));
}

TEST_CASE("mkv_rollout: T = 1 is the initial term only") {
  MfcModel m = deterministic_model(0.8);
  const ControlParams theta{scalar(0.2), scalar(0.4)};
  const CostSample s = mkv_rollout(m, theta, 1, RngStream(5));
  const double gz = (m.Q + m.Q_bar + theta.L.transpose() * (m.R + m.R_bar) * theta.L)(0, 0);
  CHECK(s.value == doctest::Approx(gz * 0.64).epsilon(1e-12));
}

TEST_CASE("mkv_rollout: T = 0 is rejected") {
  MfcModel m = benchmark_model();
  CHECK_THROWS_AS(mkv_rollout(m, zero_control(m), 0, RngStream(1)), ConfigError);
}

TEST_CASE("mkv_rollout: mean over 1e5 samples matches the exact truncated cost") {
  MfcModel m = benchmark_model();
  const ControlParams theta = zero_control(m);
  const int T = 50;
  const auto mc = oracle::mc_mkv_cost(m, theta, T, 100000, 2024);
  const double exact = oracle::truncated_cost(m, theta, T);
  CHECK(std::abs(mc.mean - exact) < 3.0 * mc.se);
}

TEST_CASE("mkv_rollout: bit-identical for identical inputs, nonnegative values") {
  MfcModel m = benchmark_model();
  const ControlParams theta{scalar(0.1), scalar(0.3)};
  const CostSample a = mkv_rollout(m, theta, 40, RngStream(99));
  const CostSample b = mkv_rollout(m, theta, 40, RngStream(99));
  CHECK(a.value == b.value);
  RngStream root(123);
  for (int i = 0; i < 200; ++i) {
    const CostSample s = mkv_rollout(m, theta, 25, root.derive(stream_tag::rollout, i));
    CHECK(s.value >= 0.0);
  }
}

TEST_CASE("pop_rollout: with N = 1 the cost does not depend on K") {
  MfcModel m = benchmark_model();
  const PopulationConfig pop = make_population(m, 1, 0.1, 7);
  const CostSample a = pop_rollout(m, pop, {scalar(0.0), scalar(0.3)}, 50, RngStream(11));
  const CostSample b = pop_rollout(m, pop, {scalar(0.4), scalar(0.3)}, 50, RngStream(11));
  CHECK(a.value == b.value);
}

TEST_CASE("pop_rollout: homogeneous deterministic case equals the MKV z-cost for any N") {
  MfcModel m = deterministic_model(0.7);
  const ControlParams theta{scalar(0.2), scalar(0.4)};
  const double want = deterministic_z_cost(m, theta, 0.7, 25);
  for (int N : {1, 3, 8}) {
    PopulationConfig pop = make_population(m, N, 0.0, 1);
    const CostSample s = pop_rollout(m, pop, theta, 25, RngStream(2));
    CHECK(s.value == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("pop_rollout: mean over 1e4 samples matches the exact truncated N-agent cost") {
  MfcModel m = benchmark_model();
  const int N = 10, T = 50;
  const PopulationConfig pop = make_population(m, N, 0.1, 7);
  const ControlParams theta = zero_control(m);

  // Exact truncated social cost by moment recursion on the stacked system.
  const StackedSystem st = build_stacked(m, pop);
  const StackedFeedback phi = theta_transplant(theta, N);
  const Mat Ac = st.A_N + st.B_N * phi.Phi;
  const Mat G = st.Q_N + phi.Phi.transpose() * st.R_N * phi.Phi;
  Mat Mt = st.x0_second_moment;
  double exact = 0.0, disc = 1.0;
  for (int t = 0; t < T; ++t) {
    exact += disc * (G * Mt).trace();
    Mt = Ac * Mt * Ac.transpose() + st.noise_second_moment;
    disc *= m.gamma;
  }

  const auto mc = oracle::mc_pop_cost(m, pop, theta, T, 10000, 555);
  CHECK(std::abs(mc.mean - exact) < 3.0 * mc.se);
}

TEST_CASE("pop_rollout: q_variations size mismatch is rejected") {
  MfcModel m = benchmark_model();
  PopulationConfig pop = make_population(m, 4, 0.1, 7);
  pop.N = 5;
  CHECK_THROWS_AS(pop_rollout(m, pop, zero_control(m), 10, RngStream(1)), ConfigError);
}

TEST_CASE("draw_q_variations: homogeneous and bounded draws") {
  MfcModel m = benchmark_model();
  RngStream rng(4);
  for (const Mat& q : draw_q_variations(m, 5, 0.0, rng)) CHECK(q.norm() == 0.0);

  RngStream rng2(5);
  const auto qs = draw_q_variations(m, 50, 0.1, rng2);
  CHECK(qs.size() == 50);
  for (const Mat& q : qs) CHECK(std::abs(q(0, 0)) < 0.1);

  // h exceeding lambda_min(Q) = 0.5 violates the psd constraint
  RngStream rng3(6);
  CHECK_THROWS_AS(draw_q_variations(m, 3, 0.6, rng3), ConfigError);
}

TEST_CASE("draw_q_variations: scalar draws have zero mean (1e6 draws)") {
  MfcModel m = benchmark_model();
  RngStream rng(8);
  const double h = 0.1;
  const auto qs = draw_q_variations(m, 1000000, h, rng);
  double mean = 0.0;
  for (const Mat& q : qs) mean += q(0, 0);
  mean /= static_cast<double>(qs.size());
  const double se = h / std::sqrt(3.0) / std::sqrt(static_cast<double>(qs.size()));
  CHECK(std::abs(mean) < 4.0 * se);
}

TEST_CASE("draw_q_variations: matrix case is symmetric with operator norm <= h") {
  MfcModel m = testutil::random_model(64, 3, 2);
  const double h = 0.9 * std::min(min_eig_sym(m.Q), min_eig_sym(m.Q + m.Q_bar));
  RngStream rng(9);
  for (const Mat& q : draw_q_variations(m, 20, h, rng)) {
    CHECK((q - q.transpose()).norm() == 0.0);
    CHECK(op_norm(q) <= h + 1e-12);
  }
}

TEST_CASE("population covariance identities at N in {2, 10}") {
  MfcModel m = benchmark_model();
  const long n = 200000;
  for (int N : {2, 10}) {
    RngStream root(40 + N);
    std::vector<double> y0sq(n), mu0sq(n), e1sq(n), e0sq(n);
    for (long i = 0; i < n; ++i) {
      RngStream ri = root.derive(stream_tag::rollout, i);
      RngStream c0 = ri.derive(stream_tag::init_common, 0);
      const double eps0 = m.noise.eps0_init.sample(c0)(0);
      double mean1 = 0.0;
      std::vector<double> eps1(N);
      for (int a = 0; a < N; ++a) {
        RngStream sa = ri.derive(stream_tag::init_agent, a);
        eps1[a] = m.noise.eps1_init.sample(sa)(0);
        mean1 += eps1[a];
      }
      mean1 /= N;
      y0sq[i] = (eps1[0] - mean1) * (eps1[0] - mean1);
      mu0sq[i] = (eps0 + mean1) * (eps0 + mean1);

      RngStream sc = ri.derive(stream_tag::step_common, 1);
      const double step0 = m.noise.eps0_step.sample(sc)(0);
      double smean1 = 0.0;
      std::vector<double> step1(N);
      for (int a = 0; a < N; ++a) {
        RngStream sa = ri.derive(stream_tag::step_agent, 100 + a);
        step1[a] = m.noise.eps1_step.sample(sa)(0);
        smean1 += step1[a];
      }
      smean1 /= N;
      e1sq[i] = (step1[0] - smean1) * (step1[0] - smean1);
      e0sq[i] = (step0 + smean1) * (step0 + smean1);
    }
    const double sy0 = m.noise.sigma_y0()(0, 0);
    const double sz0 = m.noise.sigma_z0()(0, 0);
    const double s1 = m.noise.sigma1()(0, 0);
    const double s0 = m.noise.sigma0()(0, 0);
    const auto ey = oracle::mc_from_samples(y0sq);
    const auto emu = oracle::mc_from_samples(mu0sq);
    const auto e1 = oracle::mc_from_samples(e1sq);
    const auto e0 = oracle::mc_from_samples(e0sq);
    CHECK(std::abs(ey.mean - (1.0 - 1.0 / N) * sy0) < 4.0 * ey.se);
    CHECK(std::abs(emu.mean - (sz0 + sy0 / N)) < 4.0 * emu.se);
    CHECK(std::abs(e1.mean - (1.0 - 1.0 / N) * s1) < 4.0 * e1.se);
    CHECK(std::abs(e0.mean - (s0 + s1 / N)) < 4.0 * e0.se);
  }
}

TEST_CASE("MKV/pop cost gap shrinks with N within the analytic 1/N bound") {
  MfcModel m = benchmark_model();
  const ControlParams theta = zero_control(m);
  const int T = 150;
  const long n = 30000;
  const RiccatiSolution r = solve_lyapunov_value(m, theta);
  const double g = m.gamma;
  const double gap_c = 1.0 * (op_norm(r.P_y) + op_norm(r.P_z)) *
                         (op_norm(m.noise.sigma_y0()) + g / (1.0 - g) * op_norm(m.noise.sigma1()));

  const auto mkv = oracle::mc_mkv_cost(m, theta, T, n, 31);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (int N : {2, 10}) {
    PopulationConfig pop = make_population(m, N, 0.0, 1);
    const auto popc = oracle::mc_pop_cost(m, pop, theta, T, n, 33 + N);
    const double gap = std::abs(popc.mean - mkv.mean);
    CHECK(gap <= gap_c / N + 4.0 * (popc.se + mkv.se));
    CHECK(gap <= prev_gap + 4.0 * (popc.se + mkv.se));
    prev_gap = gap;
  }
}
