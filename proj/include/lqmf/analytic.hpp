#pragma once

#include <cstdint>
#include <string>

#include "lqmf/model.hpp"
#include "lqmf/trace.hpp"

namespace lqmf {

// Model-based quantities: discounted Lyapunov/Riccati fixed points, exact
// cost and gradient of theta = (K, L), optimal gains and exact gradient
// descent. All fixed points iterate to kFixedPointTol or fail.

constexpr double kFixedPointTol = 1e-12;
constexpr int kFixedPointMaxIter = 100000;

// P_y solves P = Q + K'RK + g (A-BK)' P (A-BK); P_z the (A+Abar, B+Bbar,
// Q+Qbar, R+Rbar) twin. alpha_* = g/(1-g) Tr(P Sigma).
struct RiccatiSolution {
  Mat P_y, P_z;
  double alpha_y = 0.0, alpha_z = 0.0;
  int iterations = 0;
  double residual = 0.0;  // max Frobenius residual of the two defining equations
};

// Discounted state covariances Sigma = S + g D Sigma D' with
// S_y = Sigma_y0 + g/(1-g) Sigma1 and S_z = M_z0 + g/(1-g) Sigma0
// (M_z0 is the second moment of z_0, which carries the initial means).
struct CovariancePair {
  Mat Sigma_y, Sigma_z;
};

enum class GradientSource { exact, fd, mkv, pop };

struct GradientMeta {
  int M = 0;
  int T = 0;
  int N = 0;
  double tau = 0.0;
};

// Block pair (grad_K, grad_L); the 2l x 2d assembly is always derived.
struct GradientEstimate {
  Mat grad_K, grad_L;
  GradientSource source = GradientSource::exact;
  GradientMeta meta;

  Mat block_diag() const;
  double frob_norm() const;
};

struct CostSplit {
  double total = 0.0;
  double cost_y = 0.0;
  double cost_z = 0.0;
};

struct OptimalSolution {
  ControlParams theta;
  double cost = 0.0;
};

RiccatiSolution solve_lyapunov_value(const MfcModel& model, const ControlParams& theta);
CovariancePair state_covariances(const MfcModel& model, const ControlParams& theta);

// C(theta) = Tr(P_y Sigma_y0) + alpha_y + Tr(P_z M_z0) + alpha_z, returned
// with the (C_y, C_z) split; total is computed as the sum of the two parts.
CostSplit exact_cost(const MfcModel& model, const ControlParams& theta);

// grad_K = 2[(R + g B'P_y B)K - g B'P_y A] Sigma_y and the L twin.
GradientEstimate exact_gradient(const MfcModel& model, const ControlParams& theta);

// Central differences of exact_cost, entry by entry; the independent check of
// exact_gradient. Throws if a perturbed theta leaves the admissible set.
GradientEstimate fd_gradient(const MfcModel& model, const ControlParams& theta, double h);

// Value iteration on the two discounted Riccati equations; returns (K*, L*)
// and C* = exact_cost(K*, L*).
OptimalSolution optimal_gains(const MfcModel& model);

// Plain gradient descent with exact gradients. Halves the step (up to 30
// times) whenever the proposed iterate is inadmissible or increases the cost,
// so every recorded iterate is admissible and the cost column is monotone.
ConvergenceTrace exact_pg_run(const MfcModel& model, const ControlParams& theta0, double eta,
                              int k_max, double eps_stop);

}  // namespace lqmf
