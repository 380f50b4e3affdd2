#include "lqmf/zo_pg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "lqmf/errors.hpp"
#include "lqmf/parallel.hpp"

namespace lqmf {

Mat sample_sphere(int rows, int cols, double tau, RngStream& rng) {
  if (!(tau > 0.0)) throw ConfigError("sample_sphere: tau must be positive");
  for (;;) {
    Mat v(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) v(i, j) = rng.next_gaussian();
    const double n = v.norm();
    if (n > 0.0) return (tau / n) * v;
    // all-zero draw: probability zero, redraw
  }
}

long truncation_horizon(double eps, double gamma_theta, double c0_var) {
  if (!(gamma_theta > 0.0 && gamma_theta < 1.0))
    throw ConfigError("truncation_horizon: gamma_theta must lie in (0, 1)");
  if (!(eps > 0.0) || !(c0_var > 0.0))
    throw ConfigError("truncation_horizon: eps and c0_var must be positive");
  const double inner =
      std::log(c0_var / (eps * (1.0 - gamma_theta) * (1.0 - gamma_theta))) + 1.0;
  if (inner <= 0.0) return 2;  // the tail bound already holds at the floor
  const double t = std::pow(inner / std::log(1.0 / gamma_theta), 2.0);
  return std::max<long>(2, static_cast<long>(std::ceil(t)));
}

double gamma_theta_of(const MfcModel& model, const ControlParams& theta) {
  const double sy = op_norm(model.closed_loop_y(theta.K));
  const double sz = op_norm(model.closed_loop_z(theta.L));
  return std::max({model.gamma, model.gamma * sy * sy, model.gamma * sz * sz});
}

namespace {

using CostFn = std::function<double(const ControlParams&, RngStream)>;

GradientEstimate estimate_gradient_impl(const MfcModel& model, const ControlParams& theta,
                                        const ZoConfig& cfg, const EstimatorStreams& streams,
                                        const CostFn& cost_fn, GradientSource source, int pop_N,
                                        EstimatorDiag* diag) {
  if (cfg.M < 1) throw ConfigError("gradient estimator: M must be >= 1");
  if (!is_admissible(model, theta)) throw AdmissibilityError("gradient estimator: inadmissible theta");

  const int M = cfg.M;
  std::vector<Mat> v1(M), v2(M);
  std::vector<double> cost(M);

  // Perturbed parameters may cross the admissibility boundary; the truncated
  // rollout stays finite there and its blow-up is what steers the descent
  // back inside, so the directions are drawn unconditionally.
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
    RngStream s1(derive_key(streams.v1_base, stream_tag::index, i));
    RngStream s2(derive_key(streams.v2_base, stream_tag::index, i));
    v1[i] = sample_sphere(static_cast<int>(theta.K.rows()), static_cast<int>(theta.K.cols()),
                          cfg.tau, s1);
    v2[i] = sample_sphere(static_cast<int>(theta.L.rows()), static_cast<int>(theta.L.cols()),
                          cfg.tau, s2);
    const ControlParams theta_i{theta.K + v1[i], theta.L + v2[i]};
    cost[i] = cost_fn(theta_i, RngStream(derive_key(streams.rollout_base, stream_tag::index, i)));
  });

  // Deterministic reduction in ascending i.
  Mat gK = Mat::Zero(theta.K.rows(), theta.K.cols());
  Mat gL = Mat::Zero(theta.L.rows(), theta.L.cols());
  for (int i = 0; i < M; ++i) {
    gK += cost[i] * v1[i];
    gL += cost[i] * v2[i];
  }
  const double scale = static_cast<double>(cfg.effective_dim(model)) / (cfg.tau * cfg.tau) /
                       static_cast<double>(M);
  GradientEstimate out;
  out.grad_K = scale * gK;
  out.grad_L = scale * gL;
  out.source = source;
  out.meta = {cfg.M, cfg.T, pop_N, cfg.tau};
  if (diag) {
    diag->v1 = std::move(v1);
    diag->v2 = std::move(v2);
    diag->cost = std::move(cost);
  }
  return out;
}

}  // namespace

GradientEstimate estimate_gradient_mkv_streams(const MfcModel& model, const ControlParams& theta,
                                               const ZoConfig& cfg, const EstimatorStreams& streams,
                                               EstimatorDiag* diag) {
  return estimate_gradient_impl(
      model, theta, cfg, streams,
      [&](const ControlParams& th, RngStream s) {
        return detail::mkv_rollout_value(model, th, cfg.T, s);
      },
      GradientSource::mkv, 0, diag);
}

GradientEstimate estimate_gradient_mkv(const MfcModel& model, const ControlParams& theta,
                                       const ZoConfig& cfg, RngStream rng, EstimatorDiag* diag) {
  return estimate_gradient_mkv_streams(model, theta, cfg, EstimatorStreams::from(rng), diag);
}

GradientEstimate estimate_gradient_pop_streams(const MfcModel& model, const PopulationConfig& pop,
                                               const ControlParams& theta, const ZoConfig& cfg,
                                               const EstimatorStreams& streams,
                                               EstimatorDiag* diag) {
  return estimate_gradient_impl(
      model, theta, cfg, streams,
      [&](const ControlParams& th, RngStream s) {
        return detail::pop_rollout_value(model, pop, th, cfg.T, s);
      },
      GradientSource::pop, pop.N, diag);
}

GradientEstimate estimate_gradient_pop(const MfcModel& model, const PopulationConfig& pop,
                                       const ControlParams& theta, const ZoConfig& cfg,
                                       RngStream rng, EstimatorDiag* diag) {
  return estimate_gradient_pop_streams(model, pop, theta, cfg, EstimatorStreams::from(rng), diag);
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  Mat mK, vK, mL, vL;
  long t = 0;

  explicit AdamState(const ControlParams& theta)
      : mK(Mat::Zero(theta.K.rows(), theta.K.cols())),
        vK(Mat::Zero(theta.K.rows(), theta.K.cols())),
        mL(Mat::Zero(theta.L.rows(), theta.L.cols())),
        vL(Mat::Zero(theta.L.rows(), theta.L.cols())) {}
};

std::pair<Mat, Mat> optimizer_step(const PgOptions& opts, const GradientEstimate& g,
                                   AdamState& adam) {
  if (opts.optimizer == OptimizerKind::gd) return {-opts.eta * g.grad_K, -opts.eta * g.grad_L};
  adam.t += 1;
  adam.mK = opts.beta1 * adam.mK + (1.0 - opts.beta1) * g.grad_K;
  adam.mL = opts.beta1 * adam.mL + (1.0 - opts.beta1) * g.grad_L;
  adam.vK = opts.beta2 * adam.vK + (1.0 - opts.beta2) * g.grad_K.cwiseAbs2();
  adam.vL = opts.beta2 * adam.vL + (1.0 - opts.beta2) * g.grad_L.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(adam.t));
  const Mat mhatK = adam.mK / bc1;
  const Mat mhatL = adam.mL / bc1;
  const Mat denK = (adam.vK / bc2).cwiseSqrt().array() + opts.adam_eps;
  const Mat denL = (adam.vL / bc2).cwiseSqrt().array() + opts.adam_eps;
  return {-opts.eta * mhatK.cwiseQuotient(denK), -opts.eta * mhatL.cwiseQuotient(denL)};
}

}  // namespace

ConvergenceTrace pg_run(const MfcModel& model, const ControlParams& theta0, const PgOptions& opts) {
  if (opts.method == PgMethod::exact && opts.optimizer == OptimizerKind::gd) {
    ConvergenceTrace t = exact_pg_run(model, theta0, opts.eta, opts.k_max, opts.eps_stop);
    // Attach the evaluation columns requested by the caller.
    t.meta.master_seed = opts.master_seed;
    for (const auto& pe : opts.pop_eval) {
      t.meta.pop_N.push_back(pe.N);
      t.meta.cost_star_pop.push_back(pe.cost_star);
    }
    for (auto& row : t.rows) {
      for (const auto& pe : opts.pop_eval) {
        const double cN = pe.cost_of({row.K, row.L});
        row.cost_pop.push_back(cN);
        row.rel_err_pop.push_back((cN - pe.cost_star) / pe.cost_star);
      }
    }
    return t;
  }
  if (opts.method == PgMethod::pop && opts.pop.q_variations.empty())
    throw ConfigError("pg_run: method=pop requires a population config");
  if (!is_admissible(model, theta0)) throw AdmissibilityError("pg_run: theta0 is inadmissible");

  const OptimalSolution opt = optimal_gains(model);
  const double denom = std::max(opt.cost, std::numeric_limits<double>::min());

  ConvergenceTrace trace;
  trace.meta.method = opts.method == PgMethod::exact ? "exact"
                      : opts.method == PgMethod::mkv ? "mkv"
                                                     : "pop";
  trace.meta.optimizer = opts.optimizer == OptimizerKind::gd ? "gd" : "adam";
  trace.meta.master_seed = opts.master_seed;
  trace.meta.cost_star = opt.cost;
  for (const auto& pe : opts.pop_eval) {
    trace.meta.pop_N.push_back(pe.N);
    trace.meta.cost_star_pop.push_back(pe.cost_star);
  }

  RngStream master(opts.master_seed);
  ControlParams theta = theta0;
  AdamState adam(theta);
  const int stride = std::max(1, opts.eval_stride);

  auto evaluate_row = [&](int k, double grad_norm) {
    TraceRow row;
    row.k = k;
    row.K = theta.K;
    row.L = theta.L;
    row.cost = exact_cost(model, theta).total;
    row.rel_err_mf = (row.cost - opt.cost) / denom;
    for (const auto& pe : opts.pop_eval) {
      const double cN = pe.cost_of(theta);
      row.cost_pop.push_back(cN);
      row.rel_err_pop.push_back((cN - pe.cost_star) / pe.cost_star);
    }
    row.grad_norm = grad_norm;
    trace.rows.push_back(row);
    return row.rel_err_mf;
  };

  for (int k = 0;; ++k) {
    GradientEstimate grad;
    const bool last = k >= opts.k_max;
    if (!last) {
      RngStream iter_rng = master.derive(stream_tag::iteration, static_cast<std::uint64_t>(k));
      switch (opts.method) {
        case PgMethod::exact:
          grad = exact_gradient(model, theta);
          break;
        case PgMethod::mkv:
          grad = estimate_gradient_mkv(model, theta, opts.zo, iter_rng);
          break;
        case PgMethod::pop:
          grad = estimate_gradient_pop(model, opts.pop, theta, opts.zo, iter_rng);
          break;
      }
    }

    if (k % stride == 0 || last) {
      const double rel =
          evaluate_row(k, last ? std::numeric_limits<double>::quiet_NaN() : grad.frob_norm());
      if (opts.eps_stop > 0.0 && rel <= opts.eps_stop) {
        trace.completed = true;
        trace.stop_reason = "eps_stop";
        return trace;
      }
    }
    if (last) {
      trace.completed = true;
      trace.stop_reason = "k_max";
      return trace;
    }

    // Optimizer proposal, halved until admissible.
    auto [dK, dL] = optimizer_step(opts, grad, adam);
    bool accepted = false;
    for (int half = 0; half <= 30; ++half) {
      ControlParams next{theta.K + dK, theta.L + dL};
      if (is_admissible(model, next)) {
        theta = std::move(next);
        accepted = true;
        break;
      }
      dK *= 0.5;
      dL *= 0.5;
    }
    if (!accepted) {
      trace.completed = false;
      trace.stop_reason = "step_error";
      throw PgStepError("pg_run: no admissible step after 30 halvings at iteration " +
                            std::to_string(k),
                        k, std::move(trace));
    }
  }
}

}  // namespace lqmf
