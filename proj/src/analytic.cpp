#include "lqmf/analytic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "lqmf/errors.hpp"

namespace lqmf {

Mat GradientEstimate::block_diag() const {
  const auto l = grad_K.rows();
  const auto d = grad_K.cols();
  Mat g = Mat::Zero(2 * l, 2 * d);
  g.topLeftCorner(l, d) = grad_K;
  g.bottomRightCorner(l, d) = grad_L;
  return g;
}

double GradientEstimate::frob_norm() const {
  return std::sqrt(grad_K.squaredNorm() + grad_L.squaredNorm());
}

namespace {

void require_admissible(const MfcModel& model, const ControlParams& theta, const char* where) {
  if (!is_admissible(model, theta)) {
    std::ostringstream os;
    os << where << ": control is outside the admissible set";
    throw AdmissibilityError(os.str());
  }
}

// Fixed point of P -> C + g D' P D (value direction). The closed loop is a
// gamma-contraction on the admissible set, so plain iteration from 0 works.
struct FixedPointResult {
  Mat P;
  int iterations = 0;
  double residual = 0.0;
};

FixedPointResult lyapunov_value_fixed_point(const Mat& C, const Mat& D, double gamma,
                                            const char* what) {
  Mat P = Mat::Zero(C.rows(), C.cols());
  int it = 0;
  for (; it < kFixedPointMaxIter; ++it) {
    Mat next = C + gamma * D.transpose() * P * D;
    const double delta = (next - P).norm();
    P = std::move(next);
    if (delta <= kFixedPointTol) break;
  }
  FixedPointResult r;
  r.residual = (C + gamma * D.transpose() * P * D - P).norm();
  if (it >= kFixedPointMaxIter) {
    std::ostringstream os;
    os << what << ": fixed point did not converge (residual " << r.residual << ")";
    throw NumericsError(os.str());
  }
  r.P = std::move(P);
  r.iterations = it + 1;
  return r;
}

// Transposed direction: Sigma -> S + g D Sigma D'.
FixedPointResult lyapunov_state_fixed_point(const Mat& S, const Mat& D, double gamma,
                                            const char* what) {
  Mat Sig = Mat::Zero(S.rows(), S.cols());
  int it = 0;
  for (; it < kFixedPointMaxIter; ++it) {
    Mat next = S + gamma * D * Sig * D.transpose();
    const double delta = (next - Sig).norm();
    Sig = std::move(next);
    if (delta <= kFixedPointTol) break;
  }
  FixedPointResult r;
  r.residual = (S + gamma * D * Sig * D.transpose() - Sig).norm();
  if (it >= kFixedPointMaxIter) {
    std::ostringstream os;
    os << what << ": fixed point did not converge (residual " << r.residual << ")";
    throw NumericsError(os.str());
  }
  r.P = std::move(Sig);
  r.iterations = it + 1;
  return r;
}

double discounted_trace_term(double gamma, const Mat& P, const Mat& Sigma) {
  if (gamma == 0.0) return 0.0;
  return gamma / (1.0 - gamma) * (P * Sigma).trace();
}

}  // namespace

RiccatiSolution solve_lyapunov_value(const MfcModel& model, const ControlParams& theta) {
  require_admissible(model, theta, "solve_lyapunov_value");
  const Mat Cy = model.Q + theta.K.transpose() * model.R * theta.K;
  const Mat Cz = model.Q + model.Q_bar +
                 theta.L.transpose() * (model.R + model.R_bar) * theta.L;
  auto ry = lyapunov_value_fixed_point(Cy, model.closed_loop_y(theta.K), model.gamma, "P_y");
  auto rz = lyapunov_value_fixed_point(Cz, model.closed_loop_z(theta.L), model.gamma, "P_z");

  RiccatiSolution out;
  out.P_y = std::move(ry.P);
  out.P_z = std::move(rz.P);
  out.alpha_y = discounted_trace_term(model.gamma, out.P_y, model.noise.sigma1());
  out.alpha_z = discounted_trace_term(model.gamma, out.P_z, model.noise.sigma0());
  out.iterations = std::max(ry.iterations, rz.iterations);
  out.residual = std::max(ry.residual, rz.residual);
  return out;
}

CovariancePair state_covariances(const MfcModel& model, const ControlParams& theta) {
  require_admissible(model, theta, "state_covariances");
  const double g = model.gamma;
  const Mat Sy = model.noise.m_y0() +
                 (g == 0.0 ? Mat::Zero(model.d(), model.d()).eval()
                           : (g / (1.0 - g) * model.noise.sigma1()).eval());
  const Mat Sz = model.noise.m_z0() +
                 (g == 0.0 ? Mat::Zero(model.d(), model.d()).eval()
                           : (g / (1.0 - g) * model.noise.sigma0()).eval());
  CovariancePair out;
  out.Sigma_y = lyapunov_state_fixed_point(Sy, model.closed_loop_y(theta.K), g, "Sigma_y").P;
  out.Sigma_z = lyapunov_state_fixed_point(Sz, model.closed_loop_z(theta.L), g, "Sigma_z").P;
  return out;
}

CostSplit exact_cost(const MfcModel& model, const ControlParams& theta) {
  const RiccatiSolution r = solve_lyapunov_value(model, theta);
  CostSplit c;
  c.cost_y = (r.P_y * model.noise.m_y0()).trace() + r.alpha_y;
  c.cost_z = (r.P_z * model.noise.m_z0()).trace() + r.alpha_z;
  c.total = c.cost_y + c.cost_z;
  return c;
}

GradientEstimate exact_gradient(const MfcModel& model, const ControlParams& theta) {
  const RiccatiSolution r = solve_lyapunov_value(model, theta);
  const CovariancePair s = state_covariances(model, theta);
  const double g = model.gamma;
  const Mat Bz = model.B + model.B_bar;
  const Mat Az = model.A + model.A_bar;
  GradientEstimate out;
  out.grad_K = 2.0 *
               ((model.R + g * model.B.transpose() * r.P_y * model.B) * theta.K -
                g * model.B.transpose() * r.P_y * model.A) *
               s.Sigma_y;
  out.grad_L = 2.0 *
               ((model.R + model.R_bar + g * Bz.transpose() * r.P_z * Bz) * theta.L -
                g * Bz.transpose() * r.P_z * Az) *
               s.Sigma_z;
  out.source = GradientSource::exact;
  return out;
}

GradientEstimate fd_gradient(const MfcModel& model, const ControlParams& theta, double h) {
  require_admissible(model, theta, "fd_gradient");
  GradientEstimate out;
  out.grad_K = Mat::Zero(theta.K.rows(), theta.K.cols());
  out.grad_L = Mat::Zero(theta.L.rows(), theta.L.cols());
  out.source = GradientSource::fd;

  auto central = [&](bool on_K, int i, int j) {
    ControlParams plus = theta;
    ControlParams minus = theta;
    Mat& mp = on_K ? plus.K : plus.L;
    Mat& mm = on_K ? minus.K : minus.L;
    mp(i, j) += h;
    mm(i, j) -= h;
    if (!is_admissible(model, plus) || !is_admissible(model, minus)) {
      std::ostringstream os;
      os << "fd_gradient: perturbed theta is inadmissible at " << (on_K ? "K" : "L") << "(" << i
         << "," << j << ")";
      throw AdmissibilityError(os.str());
    }
    return (exact_cost(model, plus).total - exact_cost(model, minus).total) / (2.0 * h);
  };

  for (int i = 0; i < theta.K.rows(); ++i)
    for (int j = 0; j < theta.K.cols(); ++j) out.grad_K(i, j) = central(true, i, j);
  for (int i = 0; i < theta.L.rows(); ++i)
    for (int j = 0; j < theta.L.cols(); ++j) out.grad_L(i, j) = central(false, i, j);
  return out;
}

namespace {

// Value iteration for the discounted Riccati equation
//   P = Q + g A'PA - g^2 A'PB (R + g B'PB)^{-1} B'PA,
// gain K = g (R + g B'PB)^{-1} B'PA.
Mat discounted_riccati(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double gamma,
                       const char* what) {
  Mat P = Mat::Zero(Q.rows(), Q.cols());
  for (int it = 0; it < kFixedPointMaxIter; ++it) {
    const Mat G = R + gamma * B.transpose() * P * B;
    Eigen::FullPivLU<Mat> lu(G);
    if (!lu.isInvertible()) {
      std::ostringstream os;
      os << what << ": singular R + g B'PB during value iteration";
      throw NumericsError(os.str());
    }
    const Mat BtPA = B.transpose() * P * A;
    Mat next = Q + gamma * A.transpose() * P * A -
               gamma * gamma * BtPA.transpose() * lu.solve(BtPA);
    const double delta = (next - P).norm();
    P = std::move(next);
    if (delta <= kFixedPointTol) return P;
  }
  std::ostringstream os;
  os << what << ": discounted Riccati value iteration did not converge";
  throw NumericsError(os.str());
}

Mat riccati_gain(const Mat& A, const Mat& B, const Mat& R, const Mat& P, double gamma,
                 const char* what) {
  const Mat G = R + gamma * B.transpose() * P * B;
  Eigen::FullPivLU<Mat> lu(G);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << what << ": singular R + g B'PB at the fixed point";
    throw NumericsError(os.str());
  }
  return gamma * lu.solve(B.transpose() * P * A);
}

}  // namespace

OptimalSolution optimal_gains(const MfcModel& model) {
  const Mat Py = discounted_riccati(model.A, model.B, model.Q, model.R, model.gamma, "K*");
  const Mat Az = model.A + model.A_bar;
  const Mat Bz = model.B + model.B_bar;
  const Mat Pz = discounted_riccati(Az, Bz, model.Q + model.Q_bar, model.R + model.R_bar,
                                    model.gamma, "L*");
  OptimalSolution sol;
  sol.theta.K = riccati_gain(model.A, model.B, model.R, Py, model.gamma, "K*");
  sol.theta.L = riccati_gain(Az, Bz, model.R + model.R_bar, Pz, model.gamma, "L*");
  if (!is_admissible(model, sol.theta))
    throw NumericsError("optimal_gains: computed optimum is inadmissible; model is outside the theory");
  sol.cost = exact_cost(model, sol.theta).total;

  // Stationarity cross-check; a large gradient here means the two Riccati
  // routes disagree.
  const double gnorm = exact_gradient(model, sol.theta).frob_norm();
  if (gnorm > 1e-6 * (1.0 + std::abs(sol.cost)))
    throw NumericsError("optimal_gains: gradient is not zero at the computed optimum");
  return sol;
}

ConvergenceTrace exact_pg_run(const MfcModel& model, const ControlParams& theta0, double eta,
                              int k_max, double eps_stop) {
  require_admissible(model, theta0, "exact_pg_run");
  if (!(eta > 0.0)) throw ConfigError("exact_pg_run: eta must be positive");

  const OptimalSolution opt = optimal_gains(model);

  ConvergenceTrace trace;
  trace.meta.method = "exact";
  trace.meta.optimizer = "gd";
  trace.meta.cost_star = opt.cost;

  ControlParams theta = theta0;
  double cost = exact_cost(model, theta).total;
  const double denom = std::max(opt.cost, std::numeric_limits<double>::min());

  for (int k = 0;; ++k) {
    const GradientEstimate grad = exact_gradient(model, theta);
    TraceRow row;
    row.k = k;
    row.K = theta.K;
    row.L = theta.L;
    row.cost = cost;
    row.rel_err_mf = (cost - opt.cost) / denom;
    row.grad_norm = grad.frob_norm();
    trace.rows.push_back(row);

    if (row.rel_err_mf <= eps_stop) {
      trace.completed = true;
      trace.stop_reason = "eps_stop";
      return trace;
    }
    if (k >= k_max) {
      trace.completed = true;
      trace.stop_reason = "k_max";
      return trace;
    }

    // Blockwise step with halving until the iterate is admissible and the
    // cost does not increase.
    double step = eta;
    bool accepted = false;
    bool saw_admissible = false;
    for (int half = 0; half <= 30; ++half, step *= 0.5) {
      ControlParams next{theta.K - step * grad.grad_K, theta.L - step * grad.grad_L};
      if (!is_admissible(model, next)) continue;
      saw_admissible = true;
      const double next_cost = exact_cost(model, next).total;
      if (next_cost > cost) continue;
      theta = std::move(next);
      cost = next_cost;
      accepted = true;
      break;
    }
    if (!accepted) {
      if (!saw_admissible)
        throw PgStepError("exact_pg_run: no admissible step after 30 halvings", k,
                          std::move(trace));
      // Admissible steps exist but none descends: numerical stationarity.
      trace.completed = true;
      trace.stop_reason = "stalled";
      return trace;
    }
  }
}

}  // namespace lqmf
