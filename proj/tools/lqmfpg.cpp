// lqmfpg: config-driven experiments for linear-quadratic mean-field control.
//   solve      exact optimal gains (and N-agent optima when requested)
//   pg         exact or model-free policy-gradient runs with CSV/SVG traces
//   compare-n  N-agent optimum vs the mean-field transplant, plus the
//              heterogeneity sweep
//
// Exit codes: 0 ok, 1 runtime error, 2 config/validation error.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "lqmf/analytic.hpp"
#include "lqmf/config.hpp"
#include "lqmf/errors.hpp"
#include "lqmf/finite_agent.hpp"
#include "lqmf/io.hpp"
#include "lqmf/parallel.hpp"
#include "lqmf/zo_pg.hpp"

namespace fs = std::filesystem;
using namespace lqmf;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;                  // overrides [output] dir when set
  std::optional<std::uint64_t> seed;    // overrides [learn] master_seed
  int jobs = 0;
};

struct LoadedExperiment {
  ExperimentConfig cfg;
  MfcModel model;
  std::string config_hash;
  std::string out_dir;
};

LoadedExperiment load_experiment(const CliArgs& args) {
  LoadedExperiment exp{parse_config_file(args.config_path), {}, {}, {}};
  if (args.seed) exp.cfg.learn.master_seed = *args.seed;
  if (!args.out_dir.empty()) exp.cfg.output.dir = args.out_dir;
  exp.model = build_model(exp.cfg);
  // The hash identifies the numbers-producing part of the experiment; where
  // the files land must not change their bytes.
  ExperimentConfig hashed = exp.cfg;
  hashed.output = OutputSection{};
  exp.config_hash = hex64(fnv1a64(serialize_config(hashed)));
  exp.out_dir = exp.cfg.output.dir;

  const ValidationReport rep = validate_model(exp.model);
  std::cout << rep.to_string();
  if (!rep.assumption1) {
    write_file_atomic((fs::path(exp.out_dir) / "validation.txt").string(), rep.to_string());
    throw ConfigError("model fails Assumption 1; see validation report");
  }
  return exp;
}

std::string csv_header_comment(const LoadedExperiment& exp) {
  return "# lqmfpg-csv v1, std=sample(n-1), config_hash=" + exp.config_hash + "\n";
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

int cmd_solve(const CliArgs& args) {
  LoadedExperiment exp = load_experiment(args);
  const OptimalSolution opt = optimal_gains(exp.model);

  std::ostringstream os;
  os << "K_star = " << fmt_matrix(opt.theta.K) << "\n";
  os << "L_star = " << fmt_matrix(opt.theta.L) << "\n";
  os << "C_star = " << fmt_double(opt.cost) << "\n";
  os << "grad_norm_at_optimum = " << fmt_double(exact_gradient(exp.model, opt.theta).frob_norm())
     << "\n";

  if (exp.cfg.population.present) {
    for (int N : exp.cfg.population.N_list) {
      const PopulationConfig pop = make_population(exp.model, N, exp.cfg.population.h_tilde,
                                                   exp.cfg.population.variation_seed);
      const StackedSystem st = build_stacked(exp.model, pop);
      const NAgentSolution sol = solve_n_agent_optimal(st);
      const double mkv_cost = eval_social_cost(st, phi_mkv(exp.model, N));
      os << "\nN = " << N << "\n";
      os << "Phi_star_N = " << fmt_matrix(sol.phi.Phi) << "\n";
      os << "C_star_N = " << fmt_double(sol.cost) << "\n";
      os << "J_N_of_mkv_transplant = " << fmt_double(mkv_cost) << "\n";
    }
  }

  const std::string report = os.str();
  std::cout << report;
  write_file_atomic((fs::path(exp.out_dir) / "solution.txt").string(),
                    "# lqmfpg solution, config_hash=" + exp.config_hash + "\n" + report);
  return 0;
}

// ---------------------------------------------------------------------------
// pg
// ---------------------------------------------------------------------------

std::vector<PopEval> make_pop_evals(const LoadedExperiment& exp) {
  std::vector<PopEval> evals;
  if (!exp.cfg.population.present) return evals;
  for (int N : exp.cfg.population.N_list) {
    const PopulationConfig pop = make_population(exp.model, N, exp.cfg.population.h_tilde,
                                                 exp.cfg.population.variation_seed);
    auto stacked = std::make_shared<StackedSystem>(build_stacked(exp.model, pop));
    PopEval pe;
    pe.N = N;
    pe.cost_star = solve_n_agent_optimal(*stacked).cost;
    pe.cost_of = [stacked, N](const ControlParams& theta) {
      return eval_social_cost(*stacked, theta_transplant(theta, N));
    };
    evals.push_back(std::move(pe));
  }
  return evals;
}

std::string trace_csv(const LoadedExperiment& exp, const ConvergenceTrace& t) {
  std::ostringstream os;
  os << csv_header_comment(exp);
  os << "k,C_mf,rel_err_mf";
  for (int N : t.meta.pop_N) os << ",C_pop" << N << ",rel_err_pop" << N;
  const int ell = static_cast<int>(t.rows.empty() ? 1 : t.rows[0].K.rows());
  const int d = static_cast<int>(t.rows.empty() ? 1 : t.rows[0].K.cols());
  for (int i = 0; i < ell; ++i)
    for (int j = 0; j < d; ++j) os << ",K_" << i << "_" << j;
  for (int i = 0; i < ell; ++i)
    for (int j = 0; j < d; ++j) os << ",L_" << i << "_" << j;
  os << ",grad_norm\n";
  for (const auto& row : t.rows) {
    os << row.k << "," << fmt_double(row.cost) << "," << fmt_double(row.rel_err_mf);
    for (std::size_t p = 0; p < t.meta.pop_N.size(); ++p)
      os << "," << fmt_double(row.cost_pop[p]) << "," << fmt_double(row.rel_err_pop[p]);
    for (int i = 0; i < ell; ++i)
      for (int j = 0; j < d; ++j) os << "," << fmt_double(row.K(i, j));
    for (int i = 0; i < ell; ++i)
      for (int j = 0; j < d; ++j) os << "," << fmt_double(row.L(i, j));
    os << "," << fmt_double(row.grad_norm) << "\n";
  }
  return os.str();
}

struct RunGroup {
  std::string label;  // e.g. "mkv" or "pop_N2"
  std::vector<ConvergenceTrace> traces;  // one per seed
};

struct AggregateColumn {
  std::vector<double> mean, lo, hi;  // mean +- sample std per evaluated k
};

AggregateColumn aggregate(const RunGroup& group, const std::function<double(const TraceRow&)>& f) {
  AggregateColumn out;
  if (group.traces.empty()) return out;
  std::size_t rows = group.traces[0].rows.size();
  for (const auto& t : group.traces) rows = std::min(rows, t.rows.size());
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (const auto& t : group.traces) mean += f(t.rows[i]);
    mean /= static_cast<double>(group.traces.size());
    double var = 0.0;
    for (const auto& t : group.traces) {
      const double v = f(t.rows[i]) - mean;
      var += v * v;
    }
    const double sd = group.traces.size() > 1
                          ? std::sqrt(var / static_cast<double>(group.traces.size() - 1))
                          : 0.0;
    out.mean.push_back(mean);
    out.lo.push_back(mean - sd);
    out.hi.push_back(mean + sd);
  }
  return out;
}

std::vector<double> ks_of(const RunGroup& group) {
  std::vector<double> ks;
  if (group.traces.empty()) return ks;
  std::size_t rows = group.traces[0].rows.size();
  for (const auto& t : group.traces) rows = std::min(rows, t.rows.size());
  for (std::size_t i = 0; i < rows; ++i) ks.push_back(group.traces[0].rows[i].k);
  return ks;
}

std::string aggregate_csv(const LoadedExperiment& exp, const RunGroup& group) {
  std::ostringstream os;
  os << csv_header_comment(exp);
  os << "k,C_mf_mean,C_mf_std_lo,C_mf_std_hi,rel_err_mf_mean,rel_err_mf_std_lo,rel_err_mf_std_hi,"
        "K_0_0_mean,L_0_0_mean\n";
  const auto ks = ks_of(group);
  const auto cost = aggregate(group, [](const TraceRow& r) { return r.cost; });
  const auto rel = aggregate(group, [](const TraceRow& r) { return r.rel_err_mf; });
  const auto K = aggregate(group, [](const TraceRow& r) { return r.K(0, 0); });
  const auto L = aggregate(group, [](const TraceRow& r) { return r.L(0, 0); });
  for (std::size_t i = 0; i < ks.size(); ++i) {
    os << ks[i] << "," << fmt_double(cost.mean[i]) << "," << fmt_double(cost.lo[i]) << ","
       << fmt_double(cost.hi[i]) << "," << fmt_double(rel.mean[i]) << ","
       << fmt_double(rel.lo[i]) << "," << fmt_double(rel.hi[i]) << "," << fmt_double(K.mean[i])
       << "," << fmt_double(L.mean[i]) << "\n";
  }
  return os.str();
}

void emit_pg_plots(const LoadedExperiment& exp, const std::vector<RunGroup>& groups) {
  if (!exp.cfg.output.svg || groups.empty() || groups[0].traces.empty()) return;
  const fs::path dir(exp.out_dir);
  const double cost_star = groups[0].traces[0].meta.cost_star;

  LinePlot cost_plot;
  cost_plot.title = "mean-field cost along PG";
  cost_plot.xlabel = "iteration k";
  cost_plot.ylabel = "C(theta_k)";
  cost_plot.config_hash = exp.config_hash;
  LinePlot rel_plot;
  rel_plot.title = "relative MF error (log scale)";
  rel_plot.xlabel = "iteration k";
  rel_plot.ylabel = "(C - C*) / C*";
  rel_plot.log_y = true;
  rel_plot.config_hash = exp.config_hash;
  LinePlot par_plot;
  par_plot.title = "control parameters along PG";
  par_plot.xlabel = "iteration k";
  par_plot.ylabel = "K, L";
  par_plot.config_hash = exp.config_hash;

  for (const auto& g : groups) {
    const auto ks = ks_of(g);
    const auto cost = aggregate(g, [](const TraceRow& r) { return r.cost; });
    const auto rel = aggregate(g, [](const TraceRow& r) { return r.rel_err_mf; });
    const auto K = aggregate(g, [](const TraceRow& r) { return r.K(0, 0); });
    const auto L = aggregate(g, [](const TraceRow& r) { return r.L(0, 0); });
    cost_plot.series.push_back({"C_mf " + g.label, ks, cost.mean, cost.lo, cost.hi, false});
    rel_plot.series.push_back({"rel " + g.label, ks, rel.mean, rel.lo, rel.hi, false});
    par_plot.series.push_back({"K " + g.label, ks, K.mean, {}, {}, false});
    par_plot.series.push_back({"L " + g.label, ks, L.mean, {}, {}, false});
  }
  const auto ks = ks_of(groups[0]);
  if (!ks.empty()) {
    cost_plot.series.push_back(
        {"C*", {ks.front(), ks.back()}, {cost_star, cost_star}, {}, {}, true});
    const OptimalSolution opt = optimal_gains(exp.model);
    par_plot.series.push_back(
        {"K*", {ks.front(), ks.back()}, {opt.theta.K(0, 0), opt.theta.K(0, 0)}, {}, {}, true});
    par_plot.series.push_back(
        {"L*", {ks.front(), ks.back()}, {opt.theta.L(0, 0), opt.theta.L(0, 0)}, {}, {}, true});
  }
  write_file_atomic((dir / "pg_cost.svg").string(), cost_plot.to_svg());
  write_file_atomic((dir / "pg_rel_err.svg").string(), rel_plot.to_svg());
  write_file_atomic((dir / "pg_params.svg").string(), par_plot.to_svg());
}

int cmd_pg(const CliArgs& args) {
  LoadedExperiment exp = load_experiment(args);
  if (!exp.cfg.learn.present) throw ConfigError("pg: config needs a [learn] section");
  const LearnSection& learn = exp.cfg.learn;
  if (learn.method == "pop" && !exp.cfg.population.present)
    throw ConfigError("pg: method=pop needs a [population] section");

  const std::vector<PopEval> evals = make_pop_evals(exp);
  const fs::path dir(exp.out_dir);

  PgOptions base;
  base.optimizer = learn.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::gd;
  base.eta = learn.eta;
  base.beta1 = learn.beta1;
  base.beta2 = learn.beta2;
  base.adam_eps = learn.adam_eps;
  base.k_max = learn.k_max;
  base.eps_stop = learn.eps_stop;
  base.zo = {learn.M, learn.T, learn.tau, learn.smoothing_dim, SimKind::mkv};
  base.pop_eval = evals;
  base.eval_stride = learn.eval_stride;
  const ControlParams theta0 = initial_control(exp.cfg);

  // method=pop runs once per N in the population list; other methods run once.
  std::vector<std::pair<std::string, std::optional<int>>> run_specs;
  if (learn.method == "pop") {
    for (int N : exp.cfg.population.N_list) run_specs.push_back({"pop_N" + std::to_string(N), N});
  } else {
    run_specs.push_back({learn.method, std::nullopt});
  }

  std::vector<RunGroup> groups;
  bool partial = false;
  for (const auto& [label, maybe_N] : run_specs) {
    RunGroup group;
    group.label = label;
    for (int r = 0; r < learn.n_seeds; ++r) {
      PgOptions opts = base;
      opts.method = learn.method == "exact" ? PgMethod::exact
                    : learn.method == "mkv" ? PgMethod::mkv
                                            : PgMethod::pop;
      if (maybe_N) {
        opts.pop = make_population(exp.model, *maybe_N, exp.cfg.population.h_tilde,
                                   exp.cfg.population.variation_seed);
        opts.zo.simulator = SimKind::pop;
      }
      opts.master_seed = derive_key(learn.master_seed, stream_tag::seed_repeat, r);
      const std::string file = "trace_" + label + "_seed" + std::to_string(r) + ".csv";
      try {
        ConvergenceTrace t = pg_run(exp.model, theta0, opts);
        if (exp.cfg.output.csv) write_file_atomic((dir / file).string(), trace_csv(exp, t));
        group.traces.push_back(std::move(t));
      } catch (const PgStepError& e) {
        std::cerr << "pg: " << e.what() << " (partial trace flushed)\n";
        if (exp.cfg.output.csv) write_file_atomic((dir / file).string(), trace_csv(exp, e.trace));
        partial = true;
      }
      std::cout << "run " << label << " seed " << r << " done\n";
    }
    if (!group.traces.empty()) {
      if (exp.cfg.output.csv)
        write_file_atomic((dir / ("trace_" + label + "_agg.csv")).string(),
                          aggregate_csv(exp, group));
      groups.push_back(std::move(group));
    }
  }
  emit_pg_plots(exp, groups);
  return partial ? 1 : 0;
}

// ---------------------------------------------------------------------------
// compare-n
// ---------------------------------------------------------------------------

int cmd_compare_n(const CliArgs& args) {
  LoadedExperiment exp = load_experiment(args);
  if (!exp.cfg.population.present) throw ConfigError("compare-n: config needs [population]");
  const fs::path dir(exp.out_dir);
  const OptimalSolution opt = optimal_gains(exp.model);

  auto max_diag_dev = [&](const Mat& phi, int N) {
    const int d = exp.model.d();
    double dev = 0.0;
    for (int n = 0; n < N; ++n) {
      const Mat block = phi.block(n * exp.model.ell(), n * d, exp.model.ell(), d);
      dev = std::max(dev, (block - (-opt.theta.K)).norm());
    }
    return dev;
  };

  std::ostringstream diag_csv, cost_csv;
  diag_csv << csv_header_comment(exp) << "N,dev_opt,dev_mkv\n";
  cost_csv << csv_header_comment(exp) << "N,J_N_opt,J_N_mkv,C_star_mf\n";
  Series s_dev_opt{"Phi*_N", {}, {}, {}, {}, false};
  Series s_dev_mkv{"Phi*_MKV", {}, {}, {}, {}, false};
  Series s_cost_opt{"J^N(Phi*_N)", {}, {}, {}, {}, false};
  Series s_cost_mkv{"J^N(Phi*_MKV)", {}, {}, {}, {}, false};

  for (int N : exp.cfg.population.N_list) {
    const PopulationConfig pop = make_population(exp.model, N, exp.cfg.population.h_tilde,
                                                 exp.cfg.population.variation_seed);
    const StackedSystem st = build_stacked(exp.model, pop);
    const NAgentSolution sol = solve_n_agent_optimal(st);
    const StackedFeedback mkv = phi_mkv(exp.model, N);
    const double mkv_cost = eval_social_cost(st, mkv);
    diag_csv << N << "," << fmt_double(max_diag_dev(sol.phi.Phi, N)) << ","
             << fmt_double(max_diag_dev(mkv.Phi, N)) << "\n";
    cost_csv << N << "," << fmt_double(sol.cost) << "," << fmt_double(mkv_cost) << ","
             << fmt_double(opt.cost) << "\n";
    s_dev_opt.x.push_back(N);
    s_dev_opt.y.push_back(max_diag_dev(sol.phi.Phi, N));
    s_dev_mkv.x.push_back(N);
    s_dev_mkv.y.push_back(max_diag_dev(mkv.Phi, N));
    s_cost_opt.x.push_back(N);
    s_cost_opt.y.push_back(sol.cost);
    s_cost_mkv.x.push_back(N);
    s_cost_mkv.y.push_back(mkv_cost);
  }

  if (exp.cfg.output.csv) {
    write_file_atomic((dir / "compare_n_diag.csv").string(), diag_csv.str());
    write_file_atomic((dir / "compare_n_cost.csv").string(), cost_csv.str());
  }
  if (exp.cfg.output.svg && !s_dev_opt.x.empty()) {
    LinePlot diag_plot;
    diag_plot.title = "diagonal gap to K*";
    diag_plot.xlabel = "N";
    diag_plot.ylabel = "max_n |Phi_nn - (-K*)|";
    diag_plot.config_hash = exp.config_hash;
    diag_plot.series = {s_dev_opt, s_dev_mkv};
    LinePlot cost_plot;
    cost_plot.title = "social cost: N-agent optimum vs MKV transplant";
    cost_plot.xlabel = "N";
    cost_plot.ylabel = "J^N";
    cost_plot.config_hash = exp.config_hash;
    cost_plot.series = {s_cost_opt, s_cost_mkv};
    cost_plot.series.push_back({"C*(MF)",
                                {s_cost_opt.x.front(), s_cost_opt.x.back()},
                                {opt.cost, opt.cost},
                                {},
                                {},
                                true});
    write_file_atomic((dir / "compare_n_diag.svg").string(), diag_plot.to_svg());
    write_file_atomic((dir / "compare_n_cost.svg").string(), cost_plot.to_svg());
  }

  if (!exp.cfg.population.h_grid.empty()) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < exp.cfg.population.sweep_seeds; ++i)
      seeds.push_back(derive_key(exp.cfg.population.variation_seed, stream_tag::seed_repeat, i));
    const auto rows = heterogeneity_sweep(exp.model, exp.cfg.population.sweep_N,
                                          exp.cfg.population.h_grid, seeds);
    std::ostringstream sweep_csv;
    sweep_csv << csv_header_comment(exp) << "h_tilde,inv_h_tilde,mean_gap,std_gap,n_seeds\n";
    Series band{"mean +- std", {}, {}, {}, {}, false};
    for (const auto& row : rows) {
      const double inv = row.h_tilde > 0.0 ? 1.0 / row.h_tilde : 0.0;
      sweep_csv << fmt_double(row.h_tilde) << "," << fmt_double(inv) << ","
                << fmt_double(row.mean_gap) << "," << fmt_double(row.std_gap) << ","
                << row.n_seeds << "\n";
      if (row.h_tilde > 0.0) {
        band.x.push_back(inv);
        band.y.push_back(row.mean_gap);
        band.band_lo.push_back(row.mean_gap - row.std_gap);
        band.band_hi.push_back(row.mean_gap + row.std_gap);
      }
    }
    if (exp.cfg.output.csv)
      write_file_atomic((dir / "hetero_sweep.csv").string(), sweep_csv.str());
    if (exp.cfg.output.svg && !band.x.empty()) {
      LinePlot sweep_plot;
      sweep_plot.title =
          "heterogeneity sweep (N = " + std::to_string(exp.cfg.population.sweep_N) + ")";
      sweep_plot.xlabel = "1 / h_tilde";
      sweep_plot.ylabel = "|J^N(Phi*_N) - J^N(Phi*_MKV)|";
      sweep_plot.config_hash = exp.config_hash;
      sweep_plot.series = {band};
      write_file_atomic((dir / "hetero_sweep.svg").string(), sweep_plot.to_svg());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear-quadratic mean-field policy gradient experiments"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "experiment config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides [output] dir)");
    cmd->add_option("--seed", args.seed, "master seed override");
    cmd->add_option("--jobs", args.jobs, "worker thread cap");
  };
  CLI::App* solve = app.add_subcommand("solve", "exact optima");
  CLI::App* pg = app.add_subcommand("pg", "policy-gradient runs");
  CLI::App* cmp = app.add_subcommand("compare-n", "N-agent vs mean-field comparison");
  add_common(solve);
  add_common(pg);
  add_common(cmp);

  CLI11_PARSE(app, argc, argv);

  // LQMFPG_JOBS takes precedence over --jobs.
  if (const char* env = std::getenv("LQMFPG_JOBS")) {
    set_max_jobs(std::atoi(env));
  } else if (args.jobs > 0) {
    set_max_jobs(args.jobs);
  }

  try {
    if (solve->parsed()) return cmd_solve(args);
    if (pg->parsed()) return cmd_pg(args);
    if (cmp->parsed()) return cmd_compare_n(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
