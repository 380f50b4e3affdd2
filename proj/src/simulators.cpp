#include "lqmf/simulators.hpp"

#include <cmath>
#include <sstream>

#include "lqmf/errors.hpp"

namespace lqmf {

std::vector<Mat> draw_q_variations(const MfcModel& model, int N, double h_tilde, RngStream& rng) {
  if (N < 1) throw ConfigError("draw_q_variations: N must be >= 1");
  if (h_tilde < 0.0) throw ConfigError("draw_q_variations: h_tilde must be >= 0");
  const double cap = std::min(min_eig_sym(model.Q), min_eig_sym(model.Q + model.Q_bar));
  if (h_tilde > cap + kPsdTol) {
    std::ostringstream os;
    os << "draw_q_variations: h_tilde = " << h_tilde << " exceeds min eigenvalue bound "
       << cap << " (lambda_min(Q) = " << min_eig_sym(model.Q) << ")";
    throw ConfigError(os.str());
  }
  const int d = model.d();
  std::vector<Mat> out;
  out.reserve(N);
  for (int n = 0; n < N; ++n) {
    RngStream s = rng.derive(stream_tag::q_variation, static_cast<std::uint64_t>(n));
    if (d == 1) {
      Mat q(1, 1);
      q(0, 0) = s.next_uniform(-h_tilde, h_tilde);
      out.push_back(q);
      continue;
    }
    Mat q(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        const double v = s.next_uniform(-h_tilde, h_tilde);
        q(i, j) = v;
        q(j, i) = v;
      }
    const double nrm = op_norm(q);
    if (nrm > h_tilde && nrm > 0.0) q *= h_tilde / nrm;
    out.push_back(q);
  }
  return out;
}

PopulationConfig make_population(const MfcModel& model, int N, double h_tilde,
                                 std::uint64_t variation_seed) {
  PopulationConfig pop;
  pop.N = N;
  pop.h_tilde = h_tilde;
  pop.variation_seed = variation_seed;
  RngStream rng(variation_seed);
  pop.q_variations = draw_q_variations(model, N, h_tilde, rng);
  return pop;
}

double detail::mkv_rollout_value(const MfcModel& model, const ControlParams& theta, int T,
                                 RngStream rng) {
  if (T < 1) throw ConfigError("mkv_rollout: horizon T must be >= 1");
  const Mat Dy = model.closed_loop_y(theta.K);
  const Mat Dz = model.closed_loop_z(theta.L);
  const Mat Gy = model.Q + theta.K.transpose() * model.R * theta.K;
  const Mat Gz = model.Q + model.Q_bar + theta.L.transpose() * (model.R + model.R_bar) * theta.L;

  RngStream init1 = rng.derive(stream_tag::init_agent, 0);
  RngStream init0 = rng.derive(stream_tag::init_common, 0);
  const Vec mean1 = model.noise.eps1_init.mean();
  Vec y = model.noise.eps1_init.sample(init1) - mean1;
  Vec z = model.noise.eps0_init.sample(init0) + mean1;

  double cost = 0.0;
  double disc = 1.0;
  for (int t = 0; t < T; ++t) {
    cost += disc * (y.dot(Gy * y) + z.dot(Gz * z));
    disc *= model.gamma;
    if (t + 1 < T) {
      RngStream s1 = rng.derive(stream_tag::step_agent, static_cast<std::uint64_t>(t + 1));
      RngStream s0 = rng.derive(stream_tag::step_common, static_cast<std::uint64_t>(t + 1));
      y = Dy * y + model.noise.eps1_step.sample(s1);
      z = Dz * z + model.noise.eps0_step.sample(s0);
    }
  }
  return cost;
}

CostSample mkv_rollout(const MfcModel& model, const ControlParams& theta, int T, RngStream rng) {
  if (!is_admissible(model, theta)) throw AdmissibilityError("mkv_rollout: inadmissible theta");
  return {detail::mkv_rollout_value(model, theta, T, rng), T, SimKind::mkv, rng.key()};
}

double detail::pop_rollout_value(const MfcModel& model, const PopulationConfig& pop,
                                 const ControlParams& theta, int T, RngStream rng) {
  if (T < 1) throw ConfigError("pop_rollout: horizon T must be >= 1");
  if (pop.N < 1) throw ConfigError("pop_rollout: N must be >= 1");
  if (static_cast<int>(pop.q_variations.size()) != pop.N)
    throw ConfigError("pop_rollout: q_variations size does not match N");

  const int N = pop.N;
  const int d = model.d();
  const Mat Rsum = model.R + model.R_bar;

  std::vector<Vec> x(N);
  {
    RngStream init0 = rng.derive(stream_tag::init_common, 0);
    const Vec common0 = model.noise.eps0_init.sample(init0);
    for (int n = 0; n < N; ++n) {
      RngStream sn = rng.derive(stream_tag::init_agent, static_cast<std::uint64_t>(n));
      x[n] = common0 + model.noise.eps1_init.sample(sn);
    }
  }

  std::vector<Vec> u(N);
  double cost = 0.0;
  double disc = 1.0;
  for (int t = 0; t < T; ++t) {
    Vec xbar = Vec::Zero(d);
    for (const Vec& xn : x) xbar += xn;
    xbar /= static_cast<double>(N);

    Vec ubar = Vec::Zero(model.ell());
    for (int n = 0; n < N; ++n) {
      u[n] = -theta.K * (x[n] - xbar) - theta.L * xbar;
      ubar += u[n];
    }
    ubar /= static_cast<double>(N);

    double c = 0.0;
    for (int n = 0; n < N; ++n) {
      const Vec dx = x[n] - xbar;
      const Vec du = u[n] - ubar;
      const Mat Qn = model.Q + pop.q_variations[n];
      c += dx.dot(Qn * dx) + xbar.dot((Qn + model.Q_bar) * xbar);
      c += du.dot(model.R * du) + ubar.dot(Rsum * ubar);
    }
    cost += disc * c / static_cast<double>(N);
    disc *= model.gamma;

    if (t + 1 < T) {
      RngStream s0 = rng.derive(stream_tag::step_common, static_cast<std::uint64_t>(t + 1));
      const Vec eps0 = model.noise.eps0_step.sample(s0);
      for (int n = 0; n < N; ++n) {
        RngStream sn = rng.derive(stream_tag::agent, static_cast<std::uint64_t>(n));
        RngStream snt = sn.derive(stream_tag::step_agent, static_cast<std::uint64_t>(t + 1));
        x[n] = model.A * x[n] + model.A_bar * xbar + model.B * u[n] + model.B_bar * ubar + eps0 +
               model.noise.eps1_step.sample(snt);
      }
    }
  }
  return cost;
}

CostSample pop_rollout(const MfcModel& model, const PopulationConfig& pop,
                       const ControlParams& theta, int T, RngStream rng) {
  if (!is_admissible(model, theta)) throw AdmissibilityError("pop_rollout: inadmissible theta");
  return {detail::pop_rollout_value(model, pop, theta, T, rng), T, SimKind::pop, rng.key()};
}

}  // namespace lqmf
