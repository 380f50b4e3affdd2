#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lqmf/errors.hpp"
#include "lqmf/model.hpp"

namespace lqmf {

// One evaluated iterate of a policy-gradient run. cost_pop / rel_err_pop are
// aligned with TraceMeta::pop_N.
struct TraceRow {
  int k = 0;
  Mat K, L;
  double cost = 0.0;         // exact mean-field cost of theta_k (evaluation only)
  double rel_err_mf = 0.0;   // (C(theta_k) - C*) / C*
  std::vector<double> cost_pop;
  std::vector<double> rel_err_pop;
  double grad_norm = 0.0;    // Frobenius norm of the estimate computed at theta_k
};

struct TraceMeta {
  std::string method;     // exact | mkv | pop
  std::string optimizer;  // gd | adam
  std::uint64_t master_seed = 0;
  std::vector<int> pop_N;  // population sizes evaluated along the run
  double cost_star = 0.0;             // optimal mean-field cost
  std::vector<double> cost_star_pop;  // optimal N-agent social costs, aligned with pop_N
};

struct ConvergenceTrace {
  TraceMeta meta;
  std::vector<TraceRow> rows;
  bool completed = false;
  std::string stop_reason;  // k_max | eps_stop | stalled
};

// StepError variant thrown by the PG drivers; carries whatever was recorded
// before the failing iterate so callers can flush a partial trace.
class PgStepError : public StepError {
 public:
  PgStepError(const std::string& what, int iterate, ConvergenceTrace partial)
      : StepError(what, iterate), trace(std::move(partial)) {}
  ConvergenceTrace trace;
};

}  // namespace lqmf
