#include "lqmf/finite_agent.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "lqmf/errors.hpp"
#include "lqmf/parallel.hpp"

namespace lqmf {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

StackedSystem build_stacked(const MfcModel& model, const PopulationConfig& pop) {
  const int N = pop.N;
  const int d = model.d();
  const int ell = model.ell();
  if (N < 1) throw ConfigError("build_stacked: N must be >= 1");
  if (static_cast<int>(pop.q_variations.size()) != N)
    throw ConfigError("build_stacked: q_variations size does not match N");
  if (N * d > kStackedDimGuard) {
    std::ostringstream os;
    os << "build_stacked: N*d = " << N * d << " exceeds the dense-solve guard "
       << kStackedDimGuard;
    throw ConfigError(os.str());
  }

  const Mat I_N = Mat::Identity(N, N);
  const Mat ones = Mat::Ones(N, N);
  const Mat J = ones / static_cast<double>(N);  // averaging projector, J^2 = J

  StackedSystem s;
  s.N = N;
  s.d = d;
  s.ell = ell;
  s.gamma = model.gamma;
  s.A_N = kron(I_N, model.A) + kron(J, model.A_bar);
  s.B_N = kron(I_N, model.B) + kron(J, model.B_bar);

  // Social state cost. With D = (I - J) (x) I_d mapping X to the deviations
  // x^n - xbar and Qhat = (1/N) sum Q^n:
  //   X'Q_N X = (1/N) (DX)' blockdiag(Q^n) (DX) + xbar' (Qhat + Qbar) xbar.
  Mat q_blocks = Mat::Zero(N * d, N * d);
  Mat q_hat = Mat::Zero(d, d);
  for (int n = 0; n < N; ++n) {
    const Mat Qn = model.Q + pop.q_variations[n];
    q_blocks.block(n * d, n * d, d, d) = Qn;
    q_hat += Qn;
  }
  q_hat /= static_cast<double>(N);
  const Mat D = kron(I_N - J, Mat::Identity(d, d));
  s.Q_N = (D.transpose() * q_blocks * D) / static_cast<double>(N) +
          kron(J, q_hat + model.Q_bar) / static_cast<double>(N);
  s.Q_N = 0.5 * (s.Q_N + s.Q_N.transpose());

  // Control cost is homogeneous across agents:
  //   U'R_N U = (1/N) sum (u^n - ubar)'R(u^n - ubar) + ubar'(R+Rbar) ubar.
  s.R_N = (kron(I_N - J, model.R) + kron(J, model.R + model.R_bar)) / static_cast<double>(N);
  s.R_N = 0.5 * (s.R_N + s.R_N.transpose());

  // Per-step noise E0 + E1: the common component is perfectly correlated
  // across agents (Sigma0 in every block), the idiosyncratic one is i.i.d.
  s.noise_second_moment = kron(ones, model.noise.sigma0()) + kron(I_N, model.noise.sigma1());
  // X0 blocks: E[x^n_0 x^m_0'] = M_z0 + (n == m) * Sigma_y0.
  s.x0_second_moment = kron(ones, model.noise.m_z0()) + kron(I_N, model.noise.sigma_y0());
  return s;
}

namespace {

Mat stacked_riccati(const StackedSystem& s) {
  Mat P = Mat::Zero(s.Q_N.rows(), s.Q_N.cols());
  const double g = s.gamma;
  for (int it = 0; it < kFixedPointMaxIter; ++it) {
    const Mat G = s.R_N + g * s.B_N.transpose() * P * s.B_N;
    Eigen::LDLT<Mat> ldlt(G);
    if (ldlt.info() != Eigen::Success)
      throw NumericsError("solve_n_agent_optimal: singular R_N + g B'PB");
    const Mat BtPA = s.B_N.transpose() * P * s.A_N;
    Mat next = s.Q_N + g * s.A_N.transpose() * P * s.A_N -
               g * g * BtPA.transpose() * ldlt.solve(BtPA);
    next = 0.5 * (next + next.transpose());
    const double delta = (next - P).norm();
    P = std::move(next);
    if (delta <= kFixedPointTol) return P;
  }
  throw NumericsError("solve_n_agent_optimal: Riccati value iteration did not converge");
}

}  // namespace

NAgentSolution solve_n_agent_optimal(const StackedSystem& stacked) {
  const Mat P = stacked_riccati(stacked);
  const double g = stacked.gamma;
  const Mat G = stacked.R_N + g * stacked.B_N.transpose() * P * stacked.B_N;
  Eigen::LDLT<Mat> ldlt(G);
  if (ldlt.info() != Eigen::Success)
    throw NumericsError("solve_n_agent_optimal: singular R_N + g B'PB at the fixed point");
  NAgentSolution sol;
  sol.phi.Phi = -g * ldlt.solve(stacked.B_N.transpose() * P * stacked.A_N);
  sol.phi.label = FeedbackLabel::optimal_N;
  sol.cost = eval_social_cost(stacked, sol.phi);
  return sol;
}

StackedFeedback theta_transplant(const ControlParams& theta, int N) {
  const Mat I_N = Mat::Identity(N, N);
  const Mat ones = Mat::Ones(N, N);
  StackedFeedback f;
  f.Phi = -kron(I_N, theta.K) - kron(ones / static_cast<double>(N), theta.L - theta.K);
  f.label = FeedbackLabel::mkv_transplant;
  return f;
}

StackedFeedback phi_mkv(const MfcModel& model, int N) {
  return theta_transplant(optimal_gains(model).theta, N);
}

double eval_social_cost(const StackedSystem& stacked, const StackedFeedback& phi) {
  if (phi.Phi.rows() != stacked.ell * stacked.N || phi.Phi.cols() != stacked.d * stacked.N)
    throw ConfigError("eval_social_cost: feedback dimensions do not match the stacked system");
  const double g = stacked.gamma;
  const Mat closed = stacked.A_N + stacked.B_N * phi.Phi;
  const double s = op_norm(closed);
  if (!(g * s * s < 1.0))
    throw AdmissibilityError("eval_social_cost: closed loop violates g smax^2 < 1");

  const Mat C = stacked.Q_N + phi.Phi.transpose() * stacked.R_N * phi.Phi;
  Mat P = Mat::Zero(C.rows(), C.cols());
  for (int it = 0; it < kFixedPointMaxIter; ++it) {
    Mat next = C + g * closed.transpose() * P * closed;
    const double delta = (next - P).norm();
    P = std::move(next);
    if (delta <= kFixedPointTol) {
      const double tail =
          g == 0.0 ? 0.0 : g / (1.0 - g) * (P * stacked.noise_second_moment).trace();
      return (P * stacked.x0_second_moment).trace() + tail;
    }
  }
  throw NumericsError("eval_social_cost: Lyapunov fixed point did not converge");
}

std::vector<SweepRow> heterogeneity_sweep(const MfcModel& model, int N,
                                          const std::vector<double>& h_grid,
                                          const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("heterogeneity_sweep: needs at least one seed");
  std::vector<SweepRow> rows(h_grid.size());
  // Cells are independent; parallelize over the grid and keep seeds ordered.
  parallel_for(h_grid.size(), [&](std::size_t gi) {
    const double h = h_grid[gi];
    std::vector<double> gaps;
    gaps.reserve(seeds.size());
    for (std::uint64_t seed : seeds) {
      const PopulationConfig pop = make_population(model, N, h, seed);
      const StackedSystem stacked = build_stacked(model, pop);
      const NAgentSolution best = solve_n_agent_optimal(stacked);
      const double mkv_cost = eval_social_cost(stacked, phi_mkv(model, N));
      gaps.push_back(std::abs(best.cost - mkv_cost));
    }
    SweepRow row;
    row.h_tilde = h;
    row.n_seeds = static_cast<int>(gaps.size());
    double mean = 0.0;
    for (double v : gaps) mean += v;
    mean /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double v : gaps) var += (v - mean) * (v - mean);
    row.mean_gap = mean;
    row.std_gap = gaps.size() > 1 ? std::sqrt(var / static_cast<double>(gaps.size() - 1)) : 0.0;
    rows[gi] = row;
  });
  return rows;
}

}  // namespace lqmf
