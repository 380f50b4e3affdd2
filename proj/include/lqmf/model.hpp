#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lqmf/rng.hpp"

namespace lqmf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Tolerances used when ingesting model data: inputs whose asymmetry is below
// kSymTol are symmetrized, larger asymmetry is a hard error; eigenvalues
// above -kPsdTol count as nonnegative.
constexpr double kSymTol = 1e-10;
constexpr double kPsdTol = 1e-10;

double op_norm(const Mat& x);         // largest singular value
double min_eig_sym(const Mat& x);     // smallest eigenvalue of a symmetric matrix
Mat symmetrized(const Mat& x, const std::string& name);  // throws ConfigError beyond kSymTol

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

enum class NoiseKind { gaussian, uniform, degenerate };

// One noise distribution: mean, covariance and an i.i.d. sampler. Uniform is
// per-coordinate independent on [lower, upper]; degenerate is a constant.
class NoiseSpec {
 public:
  NoiseSpec() = default;  // zero-dimensional degenerate placeholder

  static NoiseSpec gaussian(Vec mean, Mat cov);
  static NoiseSpec uniform(Vec lower, Vec upper);
  static NoiseSpec degenerate(Vec value);

  NoiseKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Mat& covariance() const { return cov_; }
  Mat second_moment() const { return cov_ + mean_ * mean_.transpose(); }

  Vec sample(RngStream& rng) const;

  // parameter access for serialization
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  bool operator==(const NoiseSpec& other) const;

 private:
  NoiseKind kind_ = NoiseKind::degenerate;
  Vec mean_;
  Mat cov_;
  Mat sqrt_cov_;      // gaussian only: psd square root for sampling
  Vec lower_, upper_; // uniform only
};

// The four noise sources of the problem. Step noises must be mean zero;
// initial noises may have nonzero means (second moments carry them).
struct NoiseSuite {
  NoiseSpec eps0_init;  // common initial
  NoiseSpec eps1_init;  // idiosyncratic initial
  NoiseSpec eps0_step;  // common increments
  NoiseSpec eps1_step;  // idiosyncratic increments

  Mat sigma_y0() const { return eps1_init.covariance(); }        // Cov(eps1_0)
  Mat sigma_z0() const { return eps0_init.covariance(); }        // Cov(eps0_0)
  Mat sigma1() const { return eps1_step.covariance(); }          // Cov(eps1_t), t >= 1
  Mat sigma0() const { return eps0_step.covariance(); }          // Cov(eps0_t), t >= 1

  // y_0 = eps1_0 - E[eps1_0] is centered, so E[y_0 y_0'] = sigma_y0.
  Mat m_y0() const { return sigma_y0(); }
  // z_0 = eps0_0 + E[eps1_0]; E[z_0 z_0'] = Cov(eps0_0) + (m0 + m1)(m0 + m1)'.
  Mat m_z0() const {
    Vec m = eps0_init.mean() + eps1_init.mean();
    return eps0_init.covariance() + m * m.transpose();
  }
};

// ---------------------------------------------------------------------------
// Model and controls
// ---------------------------------------------------------------------------

struct MfcModel {
  Mat A, A_bar;   // d x d
  Mat B, B_bar;   // d x ell
  Mat Q, Q_bar;   // symmetric d x d
  Mat R, R_bar;   // symmetric ell x ell
  double gamma = 0.0;
  NoiseSuite noise;

  int d() const { return static_cast<int>(A.rows()); }
  int ell() const { return static_cast<int>(B.cols()); }

  Mat closed_loop_y(const Mat& K) const { return A - B * K; }
  Mat closed_loop_z(const Mat& L) const { return A + A_bar - (B + B_bar) * L; }
};

// Symmetrizes the cost matrices, checks shapes and gamma. Use this when
// assembling a model from external data.
MfcModel make_model(Mat A, Mat A_bar, Mat B, Mat B_bar, Mat Q, Mat Q_bar, Mat R, Mat R_bar,
                    double gamma, NoiseSuite noise);

// Linear feedback pair u = -K(x - xbar) - L xbar.
struct ControlParams {
  Mat K;  // ell x d
  Mat L;  // ell x d
};

ControlParams zero_control(const MfcModel& model);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  double min_eigenvalue = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  bool assumption1 = false;  // cost matrices psd; model unusable if false
  bool assumption2 = false;  // noise non-degeneracy; failure is a warning only
  std::string to_string() const;
};

ValidationReport validate_model(const MfcModel& model);

// gamma * smax(A - BK)^2 < 1 and gamma * smax(A + Abar - (B + Bbar)L)^2 < 1.
bool is_admissible(const MfcModel& model, const ControlParams& theta);

// Block system for the (y, z) state: bA = diag(A, A+Abar), bB = diag(B, B),
// bQ = diag(Q, Q+Qbar), bR = diag(R, R+Rbar), Gamma = bQ + bK' bR bK.
struct AugmentedSystem {
  Mat bA, bB, bQ, bR, Gamma_theta;
};

AugmentedSystem augment(const MfcModel& model, const ControlParams& theta);

}  // namespace lqmf
