#pragma once

#include <optional>

namespace lpamp {

// Parameters of the lp threshold eta_p(u; lambda) = argmin_x (u-x)^2/2 + lambda*|x|^p.
struct ProxParams {
  double p;       // penalty exponent in [0, 1]
  double lambda;  // regularization weight, >= 0 (0 means identity map)
};

struct ProxEval {
  double value = 0.0;
  bool active = false;
  // Derivatives wrt u and lambda; empty when the output is zero or u sits
  // exactly on the threshold (jump for p < 1, kink for p = 1).
  std::optional<double> d1;
  std::optional<double> d2;
};

// Threshold constant: eta_p(u;lambda) = 0 iff |u| < c_p * lambda^{1/(2-p)}.
// Continuous on [0,1) with c_0 = sqrt(2); the p = 1 value is defined as 1.
double c_p(double p);

// Location of the global minimum of g(x) = x + lambda*p*x^{p-1} on x > 0.
// Every nonzero output of eta_p has magnitude >= zeta_star. Requires 0 < p < 1.
double zeta_star(const ProxParams& params);

// lambda_tilde = c_p * lambda^{1/(2-p)}.
double threshold(const ProxParams& params);

// Right limit of eta_p at the threshold, i.e. the jump size for p < 1
// (equals [2(1-p)]^{1/(2-p)} lambda^{1/(2-p)}; sqrt(2 lambda) for p = 0; 0 for p = 1).
double eta_plus(const ProxParams& params);

ProxEval eta_p(double u, const ProxParams& params);

// Throwing accessors; std::domain_error when the derivative is undefined
// (inactive input or |u| exactly at the threshold).
double d1_eta_p(double u, const ProxParams& params);
double d2_eta_p(double u, const ProxParams& params);

}  // namespace lpamp
