#include "lqmf/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <sstream>

#include "lqmf/errors.hpp"

namespace lqmf {

double op_norm(const Mat& x) {
  if (x.size() == 0) return 0.0;
  return x.jacobiSvd().singularValues()(0);
}

double min_eig_sym(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Mat symmetrized(const Mat& x, const std::string& name) {
  const double asym = (x - x.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymTol) {
    std::ostringstream os;
    os << name << " is not symmetric (max |X - X'| = " << asym << ", tolerance " << kSymTol << ")";
    throw ConfigError(os.str());
  }
  return 0.5 * (x + x.transpose());
}

// ---------------------------------------------------------------------------
// NoiseSpec
// ---------------------------------------------------------------------------

namespace {

Mat psd_sqrt(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  Vec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

NoiseSpec NoiseSpec::gaussian(Vec mean, Mat cov) {
  NoiseSpec s;
  s.kind_ = NoiseKind::gaussian;
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ConfigError("gaussian noise: covariance shape does not match mean");
  s.cov_ = symmetrized(cov, "gaussian covariance");
  if (min_eig_sym(s.cov_) < -kPsdTol) throw ConfigError("gaussian noise: covariance is not psd");
  s.mean_ = std::move(mean);
  s.sqrt_cov_ = psd_sqrt(s.cov_);
  return s;
}

NoiseSpec NoiseSpec::uniform(Vec lower, Vec upper) {
  NoiseSpec s;
  s.kind_ = NoiseKind::uniform;
  if (lower.size() != upper.size()) throw ConfigError("uniform noise: bound sizes differ");
  if ((upper - lower).minCoeff() < 0.0) throw ConfigError("uniform noise: lower > upper");
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  s.mean_ = 0.5 * (s.lower_ + s.upper_);
  Vec width = s.upper_ - s.lower_;
  s.cov_ = (width.cwiseProduct(width) / 12.0).asDiagonal();
  return s;
}

NoiseSpec NoiseSpec::degenerate(Vec value) {
  NoiseSpec s;
  s.kind_ = NoiseKind::degenerate;
  s.mean_ = std::move(value);
  s.cov_ = Mat::Zero(s.mean_.size(), s.mean_.size());
  return s;
}

Vec NoiseSpec::sample(RngStream& rng) const {
  switch (kind_) {
    case NoiseKind::degenerate:
      return mean_;
    case NoiseKind::uniform: {
      Vec v(dim());
      for (int i = 0; i < dim(); ++i) v(i) = rng.next_uniform(lower_(i), upper_(i));
      return v;
    }
    case NoiseKind::gaussian: {
      Vec z(dim());
      for (int i = 0; i < dim(); ++i) z(i) = rng.next_gaussian();
      return mean_ + sqrt_cov_ * z;
    }
  }
  return mean_;
}

bool NoiseSpec::operator==(const NoiseSpec& other) const {
  if (kind_ != other.kind_ || dim() != other.dim()) return false;
  switch (kind_) {
    case NoiseKind::degenerate:
      return mean_ == other.mean_;
    case NoiseKind::uniform:
      return lower_ == other.lower_ && upper_ == other.upper_;
    case NoiseKind::gaussian:
      return mean_ == other.mean_ && cov_ == other.cov_;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Model assembly and validation
// ---------------------------------------------------------------------------

MfcModel make_model(Mat A, Mat A_bar, Mat B, Mat B_bar, Mat Q, Mat Q_bar, Mat R, Mat R_bar,
                    double gamma, NoiseSuite noise) {
  const auto d = A.rows();
  const auto ell = B.cols();
  if (A.cols() != d || A_bar.rows() != d || A_bar.cols() != d)
    throw ConfigError("A and A_bar must be d x d");
  if (B.rows() != d || B_bar.rows() != d || B_bar.cols() != ell)
    throw ConfigError("B and B_bar must be d x ell");
  if (Q.rows() != d || Q.cols() != d || Q_bar.rows() != d || Q_bar.cols() != d)
    throw ConfigError("Q and Q_bar must be d x d");
  if (R.rows() != ell || R.cols() != ell || R_bar.rows() != ell || R_bar.cols() != ell)
    throw ConfigError("R and R_bar must be ell x ell");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  for (const NoiseSpec* s : {&noise.eps0_init, &noise.eps1_init, &noise.eps0_step, &noise.eps1_step})
    if (s->dim() != d) throw ConfigError("noise dimension does not match the state dimension");

  MfcModel m;
  m.A = std::move(A);
  m.A_bar = std::move(A_bar);
  m.B = std::move(B);
  m.B_bar = std::move(B_bar);
  m.Q = symmetrized(Q, "Q");
  m.Q_bar = symmetrized(Q_bar, "Q_bar");
  m.R = symmetrized(R, "R");
  m.R_bar = symmetrized(R_bar, "R_bar");
  m.gamma = gamma;
  m.noise = std::move(noise);
  return m;
}

ControlParams zero_control(const MfcModel& model) {
  return {Mat::Zero(model.ell(), model.d()), Mat::Zero(model.ell(), model.d())};
}

namespace {

AssumptionCheck psd_check(const std::string& name, const Mat& x) {
  AssumptionCheck c;
  c.name = name;
  c.min_eigenvalue = min_eig_sym(x);
  c.pass = c.min_eigenvalue >= -kPsdTol;
  if (!c.pass) c.detail = "negative eigenvalue";
  return c;
}

}  // namespace

ValidationReport validate_model(const MfcModel& model) {
  // Gross asymmetry is a hard error, small asymmetry is folded away.
  Mat Q = symmetrized(model.Q, "Q");
  Mat Qb = symmetrized(model.Q_bar, "Q_bar");
  Mat R = symmetrized(model.R, "R");
  Mat Rb = symmetrized(model.R_bar, "R_bar");

  ValidationReport rep;
  rep.checks.push_back(psd_check("assumption1.Q", Q));
  rep.checks.push_back(psd_check("assumption1.Q+Q_bar", Q + Qb));
  rep.checks.push_back(psd_check("assumption1.R", R));
  rep.checks.push_back(psd_check("assumption1.R+R_bar", R + Rb));
  rep.assumption1 = true;
  for (const auto& c : rep.checks) rep.assumption1 = rep.assumption1 && c.pass;

  const NoiseSuite& n = model.noise;
  // Step noises must be centered; nonzero mean here breaks the dynamics model.
  for (const auto& [spec, name] :
       {std::pair<const NoiseSpec*, const char*>{&n.eps0_step, "eps0_step"},
        std::pair<const NoiseSpec*, const char*>{&n.eps1_step, "eps1_step"}}) {
    AssumptionCheck c;
    c.name = std::string("mean_zero.") + name;
    double m = spec->mean().cwiseAbs().maxCoeff();
    c.pass = m == 0.0;
    c.min_eigenvalue = m;
    if (!c.pass) c.detail = "step noise must have mean exactly zero";
    rep.checks.push_back(c);
    rep.assumption1 = rep.assumption1 && c.pass;
  }

  // Non-degeneracy: max{lmin(Sigma_y0), lmin(Sigma1)} > 0 and the (z, 0) twin.
  AssumptionCheck a2y;
  a2y.name = "assumption2.y";
  a2y.min_eigenvalue = std::max(min_eig_sym(n.sigma_y0()), min_eig_sym(n.sigma1()));
  a2y.pass = a2y.min_eigenvalue > 0.0;
  AssumptionCheck a2z;
  a2z.name = "assumption2.z";
  a2z.min_eigenvalue = std::max(min_eig_sym(n.sigma_z0()), min_eig_sym(n.sigma0()));
  a2z.pass = a2z.min_eigenvalue > 0.0;
  rep.checks.push_back(a2y);
  rep.checks.push_back(a2z);
  rep.assumption2 = a2y.pass && a2z.pass;
  if (!rep.assumption2) {
    rep.checks.push_back({"assumption2.warning", false, 0.0,
                          "degenerate noise: convergence theory does not apply, code still runs"});
  }
  return rep;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "[ok]   " : "[FAIL] ") << c.name << "  min_eig=" << c.min_eigenvalue;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  os << "assumption 1 (psd costs): " << (assumption1 ? "pass" : "FAIL") << "\n";
  os << "assumption 2 (non-degenerate noise): " << (assumption2 ? "pass" : "warn") << "\n";
  return os.str();
}

bool is_admissible(const MfcModel& model, const ControlParams& theta) {
  if (theta.K.rows() != model.ell() || theta.K.cols() != model.d() ||
      theta.L.rows() != model.ell() || theta.L.cols() != model.d())
    throw ConfigError("control dimensions do not match the model");
  const double sy = op_norm(model.closed_loop_y(theta.K));
  const double sz = op_norm(model.closed_loop_z(theta.L));
  return model.gamma * sy * sy < 1.0 && model.gamma * sz * sz < 1.0;
}

AugmentedSystem augment(const MfcModel& model, const ControlParams& theta) {
  const int d = model.d();
  const int ell = model.ell();
  AugmentedSystem s;
  s.bA = Mat::Zero(2 * d, 2 * d);
  s.bA.topLeftCorner(d, d) = model.A;
  s.bA.bottomRightCorner(d, d) = model.A + model.A_bar;
  s.bB = Mat::Zero(2 * d, 2 * ell);
  s.bB.topLeftCorner(d, ell) = model.B;
  s.bB.bottomRightCorner(d, ell) = model.B;
  s.bQ = Mat::Zero(2 * d, 2 * d);
  s.bQ.topLeftCorner(d, d) = model.Q;
  s.bQ.bottomRightCorner(d, d) = model.Q + model.Q_bar;
  s.bR = Mat::Zero(2 * ell, 2 * ell);
  s.bR.topLeftCorner(ell, ell) = model.R;
  s.bR.bottomRightCorner(ell, ell) = model.R + model.R_bar;
  // Gamma = bQ + bK' bR bK assembled blockwise so the off blocks stay exactly zero.
  s.Gamma_theta = s.bQ;
  s.Gamma_theta.topLeftCorner(d, d) += theta.K.transpose() * model.R * theta.K;
  s.Gamma_theta.bottomRightCorner(d, d) +=
      theta.L.transpose() * (model.R + model.R_bar) * theta.L;
  return s;
}

}  // namespace lqmf
