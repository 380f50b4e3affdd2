// Acceptance suite: one check per shipped guarantee, one PASS/FAIL line each.
// Returns the number of failed checks. Pass criterion numbers as arguments to
// run a subset, e.g. ./acceptance 1 4 10.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "lqmf/analytic.hpp"
#include "lqmf/finite_agent.hpp"
#include "lqmf/parallel.hpp"
#include "lqmf/simulators.hpp"
#include "lqmf/zo_pg.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lqmf;
using testutil::benchmark_model;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Mat scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// 1. exact_gradient vs central differences on random models.
Outcome criterion_gradient_oracle() {
  double worst = 0.0;
  for (int mi = 0; mi < 10; ++mi) {
    const int d = 1 + mi % 3;
    const int ell = 1 + (mi + 1) % 3;
    const MfcModel m = testutil::random_model(42000 + mi, d, ell);
    for (int ti = 0; ti < 5; ++ti) {
      const ControlParams theta = testutil::random_admissible_theta(m, 9100 + 10 * mi + ti);
      const GradientEstimate ge = exact_gradient(m, theta);
      const GradientEstimate gf = fd_gradient(m, theta, 1e-6);
      const double num = std::sqrt((ge.grad_K - gf.grad_K).squaredNorm() +
                                   (ge.grad_L - gf.grad_L).squaredNorm());
      worst = std::max(worst, num / std::max(1e-12, gf.frob_norm()));
    }
  }
  return {worst <= 1e-4, fmt("max rel err %.3g (tol 1e-4)", worst)};
}

// 2. Cost decomposition: bit-level split plus Monte Carlo agreement.
Outcome criterion_cost_decomposition() {
  const MfcModel m = benchmark_model();
  const OptimalSolution opt = optimal_gains(m);
  double worst_z = 0.0;
  for (const ControlParams& theta : {zero_control(m), opt.theta}) {
    const CostSplit c = exact_cost(m, theta);
    if (c.total != c.cost_y + c.cost_z) return {false, "split does not reconstruct the total"};
    const auto mc = oracle::mc_mkv_cost(m, theta, 200, 100000, 77001);
    worst_z = std::max(worst_z, std::abs(mc.mean - c.total) / mc.se);
  }
  return {worst_z <= 3.0, fmt("MC agreement |z| = %.2f (tol 3 s.e.)", worst_z)};
}

// 3. Exact PG: monotone cost, rel err <= 1e-6 within 1e4 steps, linear tail.
Outcome criterion_exact_pg() {
  const MfcModel m = benchmark_model();
  const ConvergenceTrace t = exact_pg_run(m, zero_control(m), 0.01, 10000, 1e-6);
  if (t.rows.back().rel_err_mf > 1e-6)
    return {false, fmt("rel err %.3g after %.0f iterations", t.rows.back().rel_err_mf,
                       static_cast<double>(t.rows.back().k))};
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    if (t.rows[i].cost > t.rows[i - 1].cost) return {false, "cost column is not monotone"};

  // least-squares fit of log10(rel err) over the window [1e-6, 1e-2]
  std::vector<double> xs, ys;
  for (const auto& row : t.rows)
    if (row.rel_err_mf >= 1e-6 && row.rel_err_mf <= 1e-2) {
      xs.push_back(row.k);
      ys.push_back(std::log10(row.rel_err_mf));
    }
  if (xs.size() < 10) return {false, "too few points in the linear-fit window"};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  return {r2 >= 0.98, fmt("converged at k=%.0f, tail-fit R^2 = %.4f (tol 0.98)",
                          static_cast<double>(t.rows.back().k), r2)};
}

// 4. Estimator unbiasedness at the smoothed-truncated level.
Outcome criterion_zo_unbiasedness() {
  const MfcModel m = benchmark_model();
  const ControlParams theta = zero_control(m);
  ZoConfig cfg;
  cfg.M = 1;
  cfg.T = 50;
  cfg.tau = 0.1;

  const long n_est = 20000;
  std::vector<double> gk(n_est), gl(n_est);
  RngStream root(808);
  std::vector<std::uint64_t> keys(n_est);
  for (long i = 0; i < n_est; ++i) keys[i] = derive_key(root.key(), stream_tag::seed_repeat, i);
  std::vector<GradientEstimate> ests(n_est);
  parallel_for(n_est, [&](std::size_t i) {
    ests[i] = estimate_gradient_mkv(m, theta, cfg, RngStream(keys[i]));
  });
  for (long i = 0; i < n_est; ++i) {
    gk[i] = ests[i].grad_K(0, 0);
    gl[i] = ests[i].grad_L(0, 0);
  }
  const auto ek = oracle::mc_from_samples(gk);
  const auto el = oracle::mc_from_samples(gl);

  const long n_quad = 100000;
  std::vector<double> qk(n_quad), ql(n_quad);
  RngStream q(809);
  for (long i = 0; i < n_quad; ++i) {
    const double v1 = sample_sphere(1, 1, cfg.tau, q)(0, 0);
    const double v2 = sample_sphere(1, 1, cfg.tau, q)(0, 0);
    const double c = oracle::truncated_cost(m, {scalar(v1), scalar(v2)}, cfg.T);
    qk[i] = c * v1 / (cfg.tau * cfg.tau);
    ql[i] = c * v2 / (cfg.tau * cfg.tau);
  }
  const auto qke = oracle::mc_from_samples(qk);
  const auto qle = oracle::mc_from_samples(ql);

  const double zk = std::abs(ek.mean - qke.mean) / std::sqrt(ek.se * ek.se + qke.se * qke.se);
  const double zl = std::abs(el.mean - qle.mean) / std::sqrt(el.se * el.se + qle.se * qle.se);
  return {zk <= 4.0 && zl <= 4.0, fmt("|z_K| = %.2f, |z_L| = %.2f (tol 4 s.e.)", zk, zl)};
}

// 5. Model-free MKV PG reference runs: final rel err <= 1e-2 on 3 seeds.
Outcome criterion_mkv_pg() {
  const MfcModel m = benchmark_model();
  double worst = 0.0;
  for (int seed = 1; seed <= 3; ++seed) {
    PgOptions opts;
    opts.method = PgMethod::mkv;
    opts.optimizer = OptimizerKind::adam;
    opts.eta = 0.01;
    opts.beta1 = 0.9;
    opts.beta2 = 0.999;
    opts.k_max = 5000;
    opts.zo = {1000, 50, 0.1};
    opts.master_seed = static_cast<std::uint64_t>(seed);
    opts.eval_stride = 100;
    const ConvergenceTrace t = pg_run(m, zero_control(m), opts);
    worst = std::max(worst, t.rows.back().rel_err_mf);
  }
  return {worst <= 1e-2, fmt("worst final rel err %.3g over 3 seeds (tol 1e-2)", worst)};
}

// 6. Population covariance identities from 1e6 draws.
Outcome criterion_population_covariances() {
  const MfcModel m = benchmark_model();
  const long n = 1000000;
  double worst = 0.0;
  for (int N : {2, 10}) {
    RngStream root(7000 + N);
    std::vector<double> y0sq(n), mu0sq(n), e1sq(n), e0sq(n);
    for (long i = 0; i < n; ++i) {
      RngStream ri = root.derive(stream_tag::rollout, i);
      RngStream c0 = ri.derive(stream_tag::init_common, 0);
      const double eps0 = m.noise.eps0_init.sample(c0)(0);
      double mean1 = 0.0;
      double first1 = 0.0;
      for (int a = 0; a < N; ++a) {
        RngStream sa = ri.derive(stream_tag::init_agent, a);
        const double e = m.noise.eps1_init.sample(sa)(0);
        if (a == 0) first1 = e;
        mean1 += e;
      }
      mean1 /= N;
      y0sq[i] = (first1 - mean1) * (first1 - mean1);
      mu0sq[i] = (eps0 + mean1) * (eps0 + mean1);

      RngStream sc = ri.derive(stream_tag::step_common, 1);
      const double step0 = m.noise.eps0_step.sample(sc)(0);
      double smean1 = 0.0, sfirst1 = 0.0;
      for (int a = 0; a < N; ++a) {
        RngStream sa = ri.derive(stream_tag::step_agent, 100 + a);
        const double e = m.noise.eps1_step.sample(sa)(0);
        if (a == 0) sfirst1 = e;
        smean1 += e;
      }
      smean1 /= N;
      e1sq[i] = (sfirst1 - smean1) * (sfirst1 - smean1);
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
    worst = std::max({worst, std::abs(ey.mean - (1.0 - 1.0 / N) * sy0) / ey.se,
                      std::abs(emu.mean - (sz0 + sy0 / N)) / emu.se,
                      std::abs(e1.mean - (1.0 - 1.0 / N) * s1) / e1.se,
                      std::abs(e0.mean - (s0 + s1 / N)) / e0.se});
  }
  return {worst <= 4.0, fmt("worst |z| = %.2f over identities at N in {2,10} (tol 4 s.e.)", worst)};
}

// 7. Homogeneous identification Phi*_N = Phi*_MKV.
Outcome criterion_homogeneous_identification() {
  const MfcModel m = benchmark_model();
  double worst = 0.0;
  for (int N : {1, 2, 5, 10}) {
    const PopulationConfig pop = make_population(m, N, 0.0, 1);
    const NAgentSolution sol = solve_n_agent_optimal(build_stacked(m, pop));
    worst = std::max(worst, (sol.phi.Phi - phi_mkv(m, N).Phi).norm());
  }
  return {worst <= 1e-7, fmt("worst ||Phi*_N - Phi*_MKV||_F = %.3g (tol 1e-7)", worst)};
}

// 8. Mean-field vs N-agent cost gap under the analytic bound.
Outcome criterion_cost_gap_bound() {
  const MfcModel m = benchmark_model();
  const OptimalSolution opt = optimal_gains(m);
  const double g = m.gamma;
  double worst_slack = 0.0;
  for (const ControlParams& theta : {zero_control(m), opt.theta}) {
    const RiccatiSolution r = solve_lyapunov_value(m, theta);
    const double bound_n1 =
        1.0 * (op_norm(r.P_y) + op_norm(r.P_z)) *
        (op_norm(m.noise.sigma_y0()) + g / (1.0 - g) * op_norm(m.noise.sigma1()));
    const double c_mf = exact_cost(m, theta).total;
    for (int N : {2, 5, 10, 50}) {
      const PopulationConfig pop = make_population(m, N, 0.0, 1);
      const double cN = eval_social_cost(build_stacked(m, pop),
                                         theta_transplant(theta, N));
      worst_slack = std::max(worst_slack, std::abs(cN - c_mf) / (bound_n1 / N));
    }
  }
  return {worst_slack <= 1.0, fmt("worst gap/bound = %.4f (tol 1)", worst_slack)};
}

// 9. N = 1 learns L but not K (reference run, master seed 4).
Outcome criterion_n1_unlearnability() {
  const MfcModel m = benchmark_model();
  const OptimalSolution opt = optimal_gains(m);
  const double Ks = opt.theta.K(0, 0), Ls = opt.theta.L(0, 0);

  PgOptions opts;
  opts.method = PgMethod::pop;
  opts.optimizer = OptimizerKind::adam;
  opts.eta = 0.01;
  opts.k_max = 5000;
  opts.zo = {1000, 50, 0.1};
  opts.zo.simulator = SimKind::pop;
  opts.pop = make_population(m, 1, 0.1, 7);
  opts.master_seed = 4;
  opts.eval_stride = 1;
  const ConvergenceTrace t = pg_run(m, zero_control(m), opts);

  double min_ld = 1e300, min_kd = 1e300;
  for (const auto& row : t.rows) {
    min_ld = std::min(min_ld, std::abs(row.L(0, 0) - Ls));
    min_kd = std::min(min_kd, std::abs(row.K(0, 0) - Ks));
  }
  const double k_floor = 0.5 * std::abs(0.0 - Ks);
  const bool pass = min_ld < 0.05 && min_kd >= k_floor;
  return {pass, fmt("min|L-L*| = %.4f (tol < 0.05), min|K-K*| = %.4f (floor %.4f)", min_ld,
                    min_kd, k_floor)};
}

// 10. Truncation horizon formula meets the covariance tail bound.
Outcome criterion_truncation_horizon() {
  double worst = 0.0;
  for (double gamma : {0.5, 0.9}) {
    MfcModel m = benchmark_model();
    m.gamma = gamma;  // theta = (0,0) realizes gamma_theta = gamma
    const ControlParams theta = zero_control(m);
    const double gt = gamma_theta_of(m, theta);
    const double c0 = std::max({m.noise.sigma_y0()(0, 0), m.noise.sigma_z0()(0, 0),
                                m.noise.sigma1()(0, 0), m.noise.sigma0()(0, 0)});
    for (double eps : {1e-2, 1e-4}) {
      const long T = truncation_horizon(eps, gt, c0);
      const CovariancePair full = state_covariances(m, theta);
      const auto trunc = oracle::truncated_sigma(m, theta, T);
      worst = std::max({worst, op_norm(full.Sigma_y - trunc.sigma_y) / eps,
                        op_norm(full.Sigma_z - trunc.sigma_z) / eps});
    }
  }
  return {worst <= 1.0, fmt("worst tail/eps = %.3g (tol 1)", worst)};
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient oracle", criterion_gradient_oracle},
    {2, "cost decomposition", criterion_cost_decomposition},
    {3, "exact PG convergence", criterion_exact_pg},
    {4, "zeroth-order unbiasedness", criterion_zo_unbiasedness},
    {5, "model-free MKV PG", criterion_mkv_pg},
    {6, "population covariance identities", criterion_population_covariances},
    {7, "homogeneous identification", criterion_homogeneous_identification},
    {8, "MF vs N-agent cost gap", criterion_cost_gap_bound},
    {9, "N=1 unlearnability of K", criterion_n1_unlearnability},
    {10, "truncation horizon", criterion_truncation_horizon},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %02d %-34s %s  %s  [%.1fs]\n", c.number, c.name,
                out.pass ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
