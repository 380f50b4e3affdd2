#pragma once

#include <cstdint>
#include <vector>

#include "lqmf/model.hpp"
#include "lqmf/rng.hpp"

namespace lqmf {

// A population of N agents sharing the model, with per-agent state-cost
// variations Q^n = Q + Qtilde^n, ||Qtilde^n|| <= h_tilde. Variations are
// drawn once and frozen; they are the identity of the population.
struct PopulationConfig {
  int N = 1;
  double h_tilde = 0.0;
  std::vector<Mat> q_variations;  // N symmetric d x d matrices
  std::uint64_t variation_seed = 0;
};

enum class SimKind { mkv, pop };

struct CostSample {
  double value = 0.0;
  int horizon = 0;
  SimKind kind = SimKind::mkv;
  std::uint64_t rng_stream_id = 0;
};

// Uniform heterogeneity draws: scalars on (-h, h) for d = 1, symmetric
// matrices with uniform entries scaled back onto the operator-norm ball for
// d > 1. Throws when h_tilde breaks the psd constraint on Q.
std::vector<Mat> draw_q_variations(const MfcModel& model, int N, double h_tilde, RngStream& rng);

PopulationConfig make_population(const MfcModel& model, int N, double h_tilde,
                                 std::uint64_t variation_seed);

// One sample of the truncated mean-field cost: simulates the decoupled
// (y, z) pair for T steps and returns
//   sum_{t<T} g^t [ y' (Q + K'RK) y + z' (Q+Qbar + L'(R+Rbar)L) z ].
CostSample mkv_rollout(const MfcModel& model, const ControlParams& theta, int T, RngStream rng);

// One sample of the truncated N-agent social cost; every agent applies
// u^n = -K (x^n - xbar) - L xbar with the same theta, one shared common-noise
// stream and N idiosyncratic streams.
CostSample pop_rollout(const MfcModel& model, const PopulationConfig& pop,
                       const ControlParams& theta, int T, RngStream rng);

namespace detail {
// Rollout cores without the admissibility precondition. A T-step rollout is
// well defined for any theta; the gradient estimators rely on this because
// sphere perturbations may cross the admissibility boundary.
double mkv_rollout_value(const MfcModel& model, const ControlParams& theta, int T, RngStream rng);
double pop_rollout_value(const MfcModel& model, const PopulationConfig& pop,
                         const ControlParams& theta, int T, RngStream rng);
}  // namespace detail

}  // namespace lqmf
