#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lqmf/model.hpp"

namespace lqmf {

// Flat INI-style experiment files: [section] headers, key = value lines,
// full-line # comments. Vectors are comma separated, matrices use ';'
// between rows. Unknown sections or keys are rejected by name.

struct ModelSection {
  int d = 1, ell = 1;
  Mat A, A_bar, B, B_bar, Q, Q_bar, R, R_bar;
  double gamma = 0.9;
};

using NoiseSection = NoiseSuite;

struct PopulationSection {
  bool present = false;
  std::vector<int> N_list;
  double h_tilde = 0.0;
  std::uint64_t variation_seed = 0;
  int sweep_N = 50;
  std::vector<double> h_grid;
  int sweep_seeds = 3;
};

struct LearnSection {
  bool present = false;
  std::string method = "exact";     // exact | mkv | pop
  std::string optimizer = "gd";     // gd | adam
  double eta = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int M = 1000;
  int T = 50;
  double tau = 0.1;
  int k_max = 1000;
  double eps_stop = 0.0;
  int smoothing_dim = 0;  // 0 = parameter dimension ell*d
  Mat K0, L0;
  std::uint64_t master_seed = 1;
  int n_seeds = 1;
  int eval_stride = 1;
};

struct OutputSection {
  std::string dir = "out";
  bool csv = true;
  bool svg = true;
};

struct ExperimentConfig {
  ModelSection model;
  NoiseSection noise;
  PopulationSection population;
  LearnSection learn;
  OutputSection output;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

MfcModel build_model(const ExperimentConfig& cfg);
ControlParams initial_control(const ExperimentConfig& cfg);

// 17-significant-digit decimal formatting used by every serializer so that
// outputs are byte-stable.
std::string fmt_double(double v);
std::string fmt_matrix(const Mat& m);

}  // namespace lqmf
