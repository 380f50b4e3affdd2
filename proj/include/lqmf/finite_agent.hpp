#pragma once

#include <cstdint>
#include <vector>

#include "lqmf/analytic.hpp"
#include "lqmf/model.hpp"
#include "lqmf/simulators.hpp"

namespace lqmf {

// Exact machinery for the N-agent problem stacked into one dN-dimensional LQ
// system: X' = A_N X + B_N U + noise, social cost X'Q_N X + U'R_N U.

constexpr int kStackedDimGuard = 2000;  // cap on N * d for the dense solves

struct StackedSystem {
  int N = 0, d = 0, ell = 0;
  double gamma = 0.0;
  Mat A_N;   // dN x dN:  I (x) A + (1/N) ones (x) Abar
  Mat B_N;   // dN x lN
  Mat Q_N;   // dN x dN, quadratic-form equivalent of the social state cost
  Mat R_N;   // lN x lN
  Mat noise_second_moment;  // per-step: ones (x) Sigma0 + I (x) Sigma1
  Mat x0_second_moment;     // E[X0 X0']: ones (x) M_z0 + I (x) Sigma_y0
};

enum class FeedbackLabel { optimal_N, mkv_transplant, custom };

struct StackedFeedback {
  Mat Phi;  // lN x dN, applied as U = Phi X
  FeedbackLabel label = FeedbackLabel::custom;
};

struct NAgentSolution {
  StackedFeedback phi;
  double cost = 0.0;
};

Mat kron(const Mat& a, const Mat& b);

StackedSystem build_stacked(const MfcModel& model, const PopulationConfig& pop);

// Discounted Riccati solve in dimension dN; Phi = -g (R_N + g B'PB)^{-1} B'PA.
NAgentSolution solve_n_agent_optimal(const StackedSystem& stacked);

// Transplant of a feedback pair into the N-agent system:
//   Phi_theta = -I (x) K - (1/N) ones (x) (L - K).
StackedFeedback theta_transplant(const ControlParams& theta, int N);

// Phi*_MKV built from the optimal mean-field gains.
StackedFeedback phi_mkv(const MfcModel& model, int N);

// Exact discounted social cost of U = Phi X via the stacked Lyapunov
// equation; requires g * smax(A_N + B_N Phi)^2 < 1.
double eval_social_cost(const StackedSystem& stacked, const StackedFeedback& phi);

struct SweepRow {
  double h_tilde = 0.0;
  double mean_gap = 0.0;  // mean |J^N(Phi*) - J^N(Phi_MKV)| over seeds
  double std_gap = 0.0;   // sample standard deviation (n - 1)
  int n_seeds = 0;
};

std::vector<SweepRow> heterogeneity_sweep(const MfcModel& model, int N,
                                          const std::vector<double>& h_grid,
                                          const std::vector<std::uint64_t>& seeds);

}  // namespace lqmf
