#include "lqmf/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lqmf/errors.hpp"

namespace lqmf {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_matrix(const Mat& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += ';';
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += fmt_double(m(i, j));
    }
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: cannot parse number '" + s + "' for key " + key);
  }
}

long long parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: cannot parse integer '" + s + "' for key " + key);
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: cannot parse seed '" + s + "' for key " + key);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

Mat parse_matrix(const std::string& s, const std::string& key) {
  const auto rows = split(s, ';');
  const auto cols0 = split(rows[0], ',');
  Mat m(rows.size(), cols0.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto cols = split(rows[i], ',');
    if (cols.size() != cols0.size())
      throw ConfigError("config: ragged matrix rows for key " + key);
    for (std::size_t j = 0; j < cols.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(cols[j], key);
  }
  return m;
}

Vec parse_vector(const std::string& s, const std::string& key) {
  const auto parts = split(s, ',');
  Vec v(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = parse_double(parts[i], key);
  return v;
}

// key/value store for one section, tracking which keys were consumed
struct Section {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  std::string take(const std::string& key, std::map<std::string, bool>& used) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("config: missing key '" + key + "'");
    used[key] = true;
    return it->second;
  }

  std::string take_or(const std::string& key, const std::string& fallback,
                      std::map<std::string, bool>& used) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    used[key] = true;
    return it->second;
  }
};

NoiseSpec parse_noise(const Section& sec, const std::string& prefix,
                      std::map<std::string, bool>& used) {
  const std::string kind = sec.take(prefix + "_kind", used);
  if (kind == "uniform") {
    return NoiseSpec::uniform(parse_vector(sec.take(prefix + "_lower", used), prefix),
                              parse_vector(sec.take(prefix + "_upper", used), prefix));
  }
  if (kind == "gaussian") {
    return NoiseSpec::gaussian(parse_vector(sec.take(prefix + "_mean", used), prefix),
                               parse_matrix(sec.take(prefix + "_cov", used), prefix));
  }
  if (kind == "degenerate") {
    return NoiseSpec::degenerate(parse_vector(sec.take(prefix + "_value", used), prefix));
  }
  throw ConfigError("config: unknown noise kind '" + kind + "' for " + prefix);
}

void serialize_noise(std::ostream& os, const std::string& prefix, const NoiseSpec& n) {
  switch (n.kind()) {
    case NoiseKind::uniform:
      os << prefix << "_kind = uniform\n";
      os << prefix << "_lower = " << fmt_matrix(n.lower().transpose()) << "\n";
      os << prefix << "_upper = " << fmt_matrix(n.upper().transpose()) << "\n";
      break;
    case NoiseKind::gaussian:
      os << prefix << "_kind = gaussian\n";
      os << prefix << "_mean = " << fmt_matrix(n.mean().transpose()) << "\n";
      os << prefix << "_cov = " << fmt_matrix(n.covariance()) << "\n";
      break;
    case NoiseKind::degenerate:
      os << prefix << "_kind = degenerate\n";
      os << prefix << "_value = " << fmt_matrix(n.mean().transpose()) << "\n";
      break;
  }
}

void check_unknown(const Section& sec, const std::string& name,
                   const std::map<std::string, bool>& used) {
  for (const auto& [key, value] : sec.kv)
    if (!used.count(key))
      throw ConfigError("config: unknown key '" + key + "' in section [" + name + "]");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("config: malformed section header at line " +
                                             std::to_string(lineno));
      current = t.substr(1, t.size() - 2);
      if (current != "model" && current != "noise" && current != "population" &&
          current != "learn" && current != "output")
        throw ConfigError("config: unknown section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    if (current.empty())
      throw ConfigError("config: key outside of any section at line " + std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (sections[current].kv.count(key))
      throw ConfigError("config: duplicate key '" + key + "' in section [" + current + "]");
    sections[current].kv[key] = value;
  }

  if (!sections.count("model")) throw ConfigError("config: missing [model] section");
  if (!sections.count("noise")) throw ConfigError("config: missing [noise] section");

  ExperimentConfig cfg;
  {
    const Section& sec = sections["model"];
    std::map<std::string, bool> used;
    cfg.model.d = static_cast<int>(parse_int(sec.take("d", used), "d"));
    cfg.model.ell = static_cast<int>(parse_int(sec.take("ell", used), "ell"));
    cfg.model.A = parse_matrix(sec.take("A", used), "A");
    cfg.model.A_bar = parse_matrix(sec.take("A_bar", used), "A_bar");
    cfg.model.B = parse_matrix(sec.take("B", used), "B");
    cfg.model.B_bar = parse_matrix(sec.take("B_bar", used), "B_bar");
    cfg.model.Q = parse_matrix(sec.take("Q", used), "Q");
    cfg.model.Q_bar = parse_matrix(sec.take("Q_bar", used), "Q_bar");
    cfg.model.R = parse_matrix(sec.take("R", used), "R");
    cfg.model.R_bar = parse_matrix(sec.take("R_bar", used), "R_bar");
    cfg.model.gamma = parse_double(sec.take("gamma", used), "gamma");
    check_unknown(sec, "model", used);
  }
  {
    const Section& sec = sections["noise"];
    std::map<std::string, bool> used;
    cfg.noise.eps0_init = parse_noise(sec, "eps0_init", used);
    cfg.noise.eps1_init = parse_noise(sec, "eps1_init", used);
    cfg.noise.eps0_step = parse_noise(sec, "eps0_step", used);
    cfg.noise.eps1_step = parse_noise(sec, "eps1_step", used);
    check_unknown(sec, "noise", used);
  }
  if (sections.count("population")) {
    const Section& sec = sections["population"];
    std::map<std::string, bool> used;
    cfg.population.present = true;
    for (const auto& part : split(sec.take("N_list", used), ','))
      cfg.population.N_list.push_back(static_cast<int>(parse_int(part, "N_list")));
    cfg.population.h_tilde = parse_double(sec.take("h_tilde", used), "h_tilde");
    cfg.population.variation_seed = parse_u64(sec.take("variation_seed", used), "variation_seed");
    cfg.population.sweep_N =
        static_cast<int>(parse_int(sec.take_or("sweep_N", "50", used), "sweep_N"));
    const std::string grid = sec.take_or("h_grid", "", used);
    if (!grid.empty())
      for (const auto& part : split(grid, ','))
        cfg.population.h_grid.push_back(parse_double(part, "h_grid"));
    cfg.population.sweep_seeds =
        static_cast<int>(parse_int(sec.take_or("sweep_seeds", "3", used), "sweep_seeds"));
    check_unknown(sec, "population", used);
  }
  if (sections.count("learn")) {
    const Section& sec = sections["learn"];
    std::map<std::string, bool> used;
    cfg.learn.present = true;
    cfg.learn.method = sec.take("method", used);
    if (cfg.learn.method != "exact" && cfg.learn.method != "mkv" && cfg.learn.method != "pop")
      throw ConfigError("config: method must be exact, mkv or pop");
    cfg.learn.optimizer = sec.take_or("optimizer", "gd", used);
    if (cfg.learn.optimizer != "gd" && cfg.learn.optimizer != "adam")
      throw ConfigError("config: optimizer must be gd or adam");
    cfg.learn.eta = parse_double(sec.take("eta", used), "eta");
    cfg.learn.beta1 = parse_double(sec.take_or("beta1", "0.9", used), "beta1");
    cfg.learn.beta2 = parse_double(sec.take_or("beta2", "0.999", used), "beta2");
    cfg.learn.adam_eps = parse_double(sec.take_or("adam_eps", "1e-8", used), "adam_eps");
    cfg.learn.M = static_cast<int>(parse_int(sec.take_or("M", "1000", used), "M"));
    cfg.learn.T = static_cast<int>(parse_int(sec.take_or("T", "50", used), "T"));
    cfg.learn.tau = parse_double(sec.take_or("tau", "0.1", used), "tau");
    cfg.learn.k_max = static_cast<int>(parse_int(sec.take("k_max", used), "k_max"));
    cfg.learn.eps_stop = parse_double(sec.take_or("eps_stop", "0", used), "eps_stop");
    cfg.learn.smoothing_dim =
        static_cast<int>(parse_int(sec.take_or("smoothing_dim", "0", used), "smoothing_dim"));
    cfg.learn.K0 = parse_matrix(sec.take("K0", used), "K0");
    cfg.learn.L0 = parse_matrix(sec.take("L0", used), "L0");
    cfg.learn.master_seed = parse_u64(sec.take_or("master_seed", "1", used), "master_seed");
    cfg.learn.n_seeds = static_cast<int>(parse_int(sec.take_or("n_seeds", "1", used), "n_seeds"));
    cfg.learn.eval_stride =
        static_cast<int>(parse_int(sec.take_or("eval_stride", "1", used), "eval_stride"));
    check_unknown(sec, "learn", used);
  }
  if (sections.count("output")) {
    const Section& sec = sections["output"];
    std::map<std::string, bool> used;
    cfg.output.dir = sec.take_or("dir", "out", used);
    const std::string formats = sec.take_or("formats", "csv,svg", used);
    cfg.output.csv = formats.find("csv") != std::string::npos;
    cfg.output.svg = formats.find("svg") != std::string::npos;
    check_unknown(sec, "output", used);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[model]\n";
  os << "d = " << cfg.model.d << "\n";
  os << "ell = " << cfg.model.ell << "\n";
  os << "A = " << fmt_matrix(cfg.model.A) << "\n";
  os << "A_bar = " << fmt_matrix(cfg.model.A_bar) << "\n";
  os << "B = " << fmt_matrix(cfg.model.B) << "\n";
  os << "B_bar = " << fmt_matrix(cfg.model.B_bar) << "\n";
  os << "Q = " << fmt_matrix(cfg.model.Q) << "\n";
  os << "Q_bar = " << fmt_matrix(cfg.model.Q_bar) << "\n";
  os << "R = " << fmt_matrix(cfg.model.R) << "\n";
  os << "R_bar = " << fmt_matrix(cfg.model.R_bar) << "\n";
  os << "gamma = " << fmt_double(cfg.model.gamma) << "\n";
  os << "\n[noise]\n";
  serialize_noise(os, "eps0_init", cfg.noise.eps0_init);
  serialize_noise(os, "eps1_init", cfg.noise.eps1_init);
  serialize_noise(os, "eps0_step", cfg.noise.eps0_step);
  serialize_noise(os, "eps1_step", cfg.noise.eps1_step);
  if (cfg.population.present) {
    os << "\n[population]\n";
    os << "N_list = ";
    for (std::size_t i = 0; i < cfg.population.N_list.size(); ++i)
      os << (i ? "," : "") << cfg.population.N_list[i];
    os << "\n";
    os << "h_tilde = " << fmt_double(cfg.population.h_tilde) << "\n";
    os << "variation_seed = " << cfg.population.variation_seed << "\n";
    os << "sweep_N = " << cfg.population.sweep_N << "\n";
    if (!cfg.population.h_grid.empty()) {
      os << "h_grid = ";
      for (std::size_t i = 0; i < cfg.population.h_grid.size(); ++i)
        os << (i ? "," : "") << fmt_double(cfg.population.h_grid[i]);
      os << "\n";
    }
    os << "sweep_seeds = " << cfg.population.sweep_seeds << "\n";
  }
  if (cfg.learn.present) {
    os << "\n[learn]\n";
    os << "method = " << cfg.learn.method << "\n";
    os << "optimizer = " << cfg.learn.optimizer << "\n";
    os << "eta = " << fmt_double(cfg.learn.eta) << "\n";
    os << "beta1 = " << fmt_double(cfg.learn.beta1) << "\n";
    os << "beta2 = " << fmt_double(cfg.learn.beta2) << "\n";
    os << "adam_eps = " << fmt_double(cfg.learn.adam_eps) << "\n";
    os << "M = " << cfg.learn.M << "\n";
    os << "T = " << cfg.learn.T << "\n";
    os << "tau = " << fmt_double(cfg.learn.tau) << "\n";
    os << "k_max = " << cfg.learn.k_max << "\n";
    os << "eps_stop = " << fmt_double(cfg.learn.eps_stop) << "\n";
    os << "smoothing_dim = " << cfg.learn.smoothing_dim << "\n";
    os << "K0 = " << fmt_matrix(cfg.learn.K0) << "\n";
    os << "L0 = " << fmt_matrix(cfg.learn.L0) << "\n";
    os << "master_seed = " << cfg.learn.master_seed << "\n";
    os << "n_seeds = " << cfg.learn.n_seeds << "\n";
    os << "eval_stride = " << cfg.learn.eval_stride << "\n";
  }
  os << "\n[output]\n";
  os << "dir = " << cfg.output.dir << "\n";
  os << "formats = ";
  if (cfg.output.csv) os << "csv";
  if (cfg.output.csv && cfg.output.svg) os << ",";
  if (cfg.output.svg) os << "svg";
  os << "\n";
  return os.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

MfcModel build_model(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  if (m.A.rows() != m.d || m.B.cols() != m.ell)
    throw ConfigError("config: matrix shapes disagree with d/ell");
  return make_model(m.A, m.A_bar, m.B, m.B_bar, m.Q, m.Q_bar, m.R, m.R_bar, m.gamma, cfg.noise);
}

ControlParams initial_control(const ExperimentConfig& cfg) {
  if (!cfg.learn.present) throw ConfigError("config: [learn] section required");
  return {cfg.learn.K0, cfg.learn.L0};
}

}  // namespace lqmf
