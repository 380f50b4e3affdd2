#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lqmf/analytic.hpp"
#include "lqmf/model.hpp"
#include "lqmf/rng.hpp"
#include "lqmf/simulators.hpp"
#include "lqmf/trace.hpp"

namespace lqmf {

// Zeroth-order gradient estimation from sphere-perturbed cost samples, and
// the policy-gradient driver shared by the exact and model-free methods.

// Perturbed parameters theta + v may cross the admissibility boundary; the
// T-step rollouts remain finite there, so no smallness of tau is assumed.
struct ZoConfig {
  int M = 1;            // perturbation count
  int T = 1;            // rollout horizon
  double tau = 0.1;     // sphere radius (Frobenius)
  int smoothing_dim = 0;  // dim/tau^2 factor per block; 0 = parameter dimension ell*d
  SimKind simulator = SimKind::mkv;

  int effective_dim(const MfcModel& model) const {
    return smoothing_dim > 0 ? smoothing_dim : model.ell() * model.d();
  }
};

// Uniform draw on the Frobenius sphere of radius tau in rows x cols matrices.
Mat sample_sphere(int rows, int cols, double tau, RngStream& rng);

// Per-perturbation internals, recorded on request by the estimators.
struct EstimatorDiag {
  std::vector<Mat> v1, v2;
  std::vector<double> cost;
};

// Independent stream roots for the two direction families and the rollouts;
// exposed so tests can splice one family while holding the others fixed.
struct EstimatorStreams {
  std::uint64_t v1_base = 0, v2_base = 0, rollout_base = 0;

  static EstimatorStreams from(const RngStream& rng) {
    return {derive_key(rng.key(), stream_tag::perturb_v1),
            derive_key(rng.key(), stream_tag::perturb_v2),
            derive_key(rng.key(), stream_tag::rollout)};
  }
};

// Estimator: for i = 1..M draw v1_i, v2_i uniformly on the sphere, roll out
// theta_i = (K + v1_i, L + v2_i), return (dim/tau^2) (1/M) sum C_i v_{.,i}
// per block.
GradientEstimate estimate_gradient_mkv(const MfcModel& model, const ControlParams& theta,
                                       const ZoConfig& cfg, RngStream rng,
                                       EstimatorDiag* diag = nullptr);
GradientEstimate estimate_gradient_mkv_streams(const MfcModel& model, const ControlParams& theta,
                                               const ZoConfig& cfg, const EstimatorStreams& streams,
                                               EstimatorDiag* diag = nullptr);

// Same estimator against the population simulator; all N agents share each
// perturbed theta_i.
GradientEstimate estimate_gradient_pop(const MfcModel& model, const PopulationConfig& pop,
                                       const ControlParams& theta, const ZoConfig& cfg,
                                       RngStream rng, EstimatorDiag* diag = nullptr);
GradientEstimate estimate_gradient_pop_streams(const MfcModel& model, const PopulationConfig& pop,
                                               const ControlParams& theta, const ZoConfig& cfg,
                                               const EstimatorStreams& streams,
                                               EstimatorDiag* diag = nullptr);

// Rollout length that guarantees || Sigma - Sigma^T || <= eps:
//   T >= ( (log( (1/eps) c0_var / (1-g_theta)^2 ) + 1) / log(1/g_theta) )^2,
// floored at 2.
long truncation_horizon(double eps, double gamma_theta, double c0_var);

// g_theta = max{ g, g ||A - BK||^2, g ||A+Abar - (B+Bbar)L||^2 }.
double gamma_theta_of(const MfcModel& model, const ControlParams& theta);

// ---------------------------------------------------------------------------
// Policy-gradient driver
// ---------------------------------------------------------------------------

enum class PgMethod { exact, mkv, pop };
enum class OptimizerKind { gd, adam };

// Hook for evaluating the exact N-agent social cost of an iterate; wired up
// from the finite-agent machinery by the caller.
struct PopEval {
  int N = 0;
  double cost_star = 0.0;
  std::function<double(const ControlParams&)> cost_of;
};

struct PgOptions {
  PgMethod method = PgMethod::exact;
  OptimizerKind optimizer = OptimizerKind::gd;
  double eta = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int k_max = 100;
  double eps_stop = 0.0;  // <= 0 disables early stopping
  ZoConfig zo;
  PopulationConfig pop;           // required when method = pop (q_variations set)
  std::vector<PopEval> pop_eval;  // extra evaluation columns
  int eval_stride = 1;
  std::uint64_t master_seed = 0;
};

// Runs the chosen estimator/optimizer pair from theta0. The update never
// sees the model in model-free mode; exact_cost is used for evaluation
// columns only. Inadmissible proposals are step-halved (up to 30 times);
// exact GD additionally enforces descent and delegates to exact_pg_run.
ConvergenceTrace pg_run(const MfcModel& model, const ControlParams& theta0, const PgOptions& opts);

}  // namespace lqmf
