#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lpamp/prior.hpp"

namespace lpamp {

inline constexpr double kLambdaInf = std::numeric_limits<double>::infinity();
inline constexpr int kDefaultQuadOrder = 61;

struct SEConfig {
  double delta = 0.2;    // undersampling ratio n/N, in (0, 1]
  double sigma_w = 0.0;  // measurement noise std, >= 0
  SignalPrior prior;
  int quad_order = kDefaultQuadOrder;

  void check() const;
};

// Denoising risk E(eta_p(X + sigma*Z; lambda) - X)^2 for X ~ prior, Z ~ N(0,1).
// The Z-integral is split at the thresholds of eta_p per signal atom: the
// inactive region is summed exactly via the Gaussian CDF and each active piece
// is integrated with composite Gauss-Legendre (p = 0 and p = 1 in closed form).
// With h > 0 the smoothed denoiser eta_tilde is used instead.
double risk(double sigma, double lambda, double p, const SignalPrior& prior,
            int quad_order = kDefaultQuadOrder, double h = 0.0);

// Scale-free risk: E over the unit-noise problem with atoms at u/sigma,
// threshold tau = lambda / sigma^{2-p}; risk(...) = sigma^2 * unit value.
double unit_risk(double tau, double p,
                 const std::vector<std::pair<double, double>>& unit_atoms,
                 double epsilon, int quad_order = kDefaultQuadOrder,
                 double h_unit = 0.0);

// Thresholding/adaptation policy driving the SE recursion.
struct Policy {
  enum class Kind { kFixedLambda, kPowerLaw, kOptimalLambda, kOptimalAdapt };

  Kind kind = Kind::kOptimalLambda;
  double p = 1.0;               // exponent (fixed-p kinds)
  double lambda = 0.0;          // kFixedLambda
  double tau = 0.0, q = 1.0;    // kPowerLaw: lambda = tau * sigma^q
  std::vector<double> p_grid;   // kOptimalAdapt

  static Policy fixed_lambda(double p, double lambda);
  static Policy power_law(double p, double tau, double q);
  static Policy optimal_lambda_policy(double p);
  static Policy optimal_adapt(std::vector<double> p_grid);
};

struct PolicyEval {
  double p = 1.0;
  double lambda = 0.0;  // kLambdaInf means threshold everything
  double tau = 0.0;     // lambda / sigma^{2-p} when sigma > 0
  double risk_value = 0.0;
};

// Oracle threshold lambda_*(sigma) = argmin_lambda risk(sigma, lambda, p).
// Returns lambda = kLambdaInf only for priors with no nonzero part; sigma = 0
// returns lambda = 0 (exact identity). Minimization runs in tau = lambda /
// sigma^{2-p}: 60-point log grid on [1e-3, 1e3] (auto-expanded if the argmin
// hits an endpoint) followed by golden-section refinement.
PolicyEval optimal_lambda(double sigma, double p, const SignalPrior& prior,
                          int quad_order = kDefaultQuadOrder);

// Joint oracle over a p grid: best optimal_lambda(sigma, p) across the grid.
PolicyEval optimal_adaptation(double sigma, const SignalPrior& prior,
                              const std::vector<double>& p_grid,
                              int quad_order = kDefaultQuadOrder);

// Resolve a policy at the given sigma (computes oracle parameters on demand).
PolicyEval resolve_policy(const Policy& policy, double sigma,
                          const SignalPrior& prior, int quad_order);

// One SE step: sigma_w^2 + risk(sigma, lambda(sigma), p(sigma)) / delta.
double psi(double sigma_sq, const Policy& policy, const SEConfig& config);

struct Trajectory {
  std::vector<double> sigma_sq;  // sigma_0^2, sigma_1^2, ...
  bool converged = false;
};

Trajectory iterate(const SEConfig& config, const Policy& policy, double sigma0_sq,
                   int max_iters = 200, double tol = 1e-12);

enum class FixedPointClass { kStable, kUnstable, kHalfStable };

struct FixedPoint {
  double sigma_sq = 0.0;
  FixedPointClass cls = FixedPointClass::kStable;
};

struct FixedPointReport {
  std::vector<FixedPoint> points;  // ascending in sigma_sq, including 0 if fixed
  double lowest_stable = std::numeric_limits<double>::quiet_NaN();
  double highest_stable = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

std::string to_string(FixedPointClass cls);

// Scan psi(s) - s on a composite log+linear grid over (0, sigma_sq_max],
// bisect each sign change to 1e-10 relative accuracy and classify by the sign
// pattern on both sides; sigma^2 = 0 is tested separately. If the grid looks
// too coarse (classification inconsistency) the scan retries at 4x density.
FixedPointReport fixed_points(const SEConfig& config, const Policy& policy,
                              double sigma_sq_max = 0.0, int grid_points = 2000);

// Fast accessors for the extreme stable fixed points: monotone SE iteration
// from 0 (resp. from above the Prop.-1 bound) with secant refinement.
double lowest_stable_fp(const SEConfig& config, const Policy& policy);
double highest_stable_fp(const SEConfig& config, const Policy& policy);

// Default scan ceiling: (E X^2 + 1)/delta + sigma_w^2 + 1.
double sigma_sq_ceiling(const SEConfig& config);

}  // namespace lpamp
