#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lpamp/se.hpp"

namespace lpamp {

struct InstanceSpec {
  int N = 5000;
  double delta = 0.2;
  SignalPrior prior;
  double sigma_w = 0.0;
  std::uint64_t seed = 1;
};

struct Instance {
  Eigen::MatrixXd A;  // n x N, entries N(0, 1/n)
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> x_true;
  double sigma_w = 0.0;

  int n() const { return static_cast<int>(A.rows()); }
  int N() const { return static_cast<int>(A.cols()); }
  double delta() const { return double(A.rows()) / double(A.cols()); }
};

// One RNG stream per (seed, stream); streams are decorrelated by hashing.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

// y = A x_o + w with A_ij ~ N(0, 1/n), exactly round(eps*N) nonzeros drawn
// from the prior's nonzero part at uniformly chosen positions.
Instance generate(const InstanceSpec& spec);

struct AmpState {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  int t = 0;
  double sigma_hat = 0.0;  // ||z||_2 / sqrt(n)
  double lambda_t = 0.0;
  double p_t = 1.0;
  double h_t = 0.0;
};

struct AmpPolicy {
  // lambda_t = tau * sigma_hat^q with fixed exponent p, or SURE-tuned
  // (lambda and optionally p) when tune is set.
  double p = 1.0;
  double tau = 0.0;
  double q = 1.0;
  bool tune = false;
  std::vector<double> p_grid;  // used when tune is set; {p} if empty
  double h_scale = 1.0;        // h_t = h_scale * sigma_hat / N^{1/3}
};

AmpState init(const Instance& instance,
              const std::optional<Eigen::VectorXd>& x_init = std::nullopt);

// One AMP update: x <- eta_tilde(A^T z + x; lambda), Onsager-corrected residual,
// refreshed sigma_hat. Throws std::runtime_error("diverged") on non-finite values.
AmpState step(const AmpState& state, const Instance& instance,
              const AmpPolicy& policy);

// SURE for the smoothed denoiser at pseudo-data v_plus_x = x + A^T z:
//   (1/N)||eta(v) - v||^2 - sigma^2 + (2 sigma^2 / N) sum eta'(v_i).
double sure_estimate(const Eigen::VectorXd& v_plus_x, double sigma_hat, double p,
                     double h, double lambda);

struct SureCurvePoint {
  double lambda = 0.0;
  double sure = 0.0;
};

struct SureCurve {
  double p = 1.0;
  std::vector<SureCurvePoint> points;  // sorted by lambda
  double lambda_hat = 0.0;
};

// Grid minimization of SURE at fixed (p, h): 40 log-spaced lambdas over
// [1e-3, 10] * sigma_hat^{2-p} plus one golden-section refinement; ties go to
// the larger lambda.
SureCurve sure_curve(const Eigen::VectorXd& v_plus_x, double sigma_hat, double p,
                     double h, const std::vector<double>& lambda_grid = {});

struct TuneResult {
  double lambda_hat = 0.0;
  double p_hat = 1.0;
  double sure = 0.0;
};

TuneResult tune(const Eigen::VectorXd& v_plus_x, double sigma_hat, double h,
                const std::vector<double>& p_grid,
                const std::vector<double>& lambda_grid = {});

struct AmpRecord {
  int t = 0;
  double sigma_hat = 0.0;
  double lambda = 0.0;
  double p = 1.0;
  double mse = std::numeric_limits<double>::quiet_NaN();  // needs x_true
  double sure = std::numeric_limits<double>::quiet_NaN();
};

struct AmpRunConfig {
  AmpPolicy policy;
  int max_iters = 50;
  double tol = 1e-6;  // relative stop on sigma_hat
  bool record_sure = false;
};

std::vector<AmpRecord> run(const Instance& instance, const AmpRunConfig& config);

}  // namespace lpamp
