#pragma once

#include <vector>

#include "lpamp/se.hpp"

namespace lpamp {

struct MinimaxResult {
  double value = 0.0;
  double tau_star = 0.0;
  double mu_star = 0.0;  // kLambdaInf when the sup over mu is attained at infinity
  double gap = 0.0;      // m_bar - m_under when both are known, else 0
};

// (1 - eps) E eta_p^2(Z; tau) + eps E (eta_p(mu + Z; tau) - mu)^2.
double inner_risk(double mu, double tau, double p, double epsilon,
                  int quad_order = kDefaultQuadOrder);

// Value of the mu -> infinity limit of the eps term: 1 + tau^2 for p = 1
// (soft thresholding keeps a lambda bias), 1 for p < 1 (the shrinkage
// lambda*p*|u|^{p-1} vanishes as |u| grows).
double inner_risk_mu_inf(double tau, double p, double epsilon,
                         int quad_order = kDefaultQuadOrder);

// inf over tau of sup over mu (mu grid on [1e-2, 1e3] plus the mu = inf limit).
MinimaxResult m_bar(double p, double epsilon, int quad_order = kDefaultQuadOrder);

// sup over mu of inf over tau.
MinimaxResult m_under(double p, double epsilon, int quad_order = kDefaultQuadOrder);

// Closed-form soft-threshold program:
//   M_1(eps) = inf_tau (1 - eps)(2(1 + tau^2) Phi(-tau) - 2 tau phi(tau)) + eps(1 + tau^2).
double m1(double epsilon);
double m1_tau_star(double epsilon);

// Phase-transition curves.
double eps_star_1(double delta);
enum class MinimaxSide { kBar, kUnder };
double eps_star_p(double delta, double p, MinimaxSide side,
                  int quad_order = kDefaultQuadOrder);
double continuation_pt(double delta, const std::vector<double>& p_grid,
                       int quad_order = kDefaultQuadOrder);

// Large-noise constant Gamma_{alpha,p} = E eta_p^2(Z; (alpha/c_p)^{2-p}).
double gamma_alpha_p(double alpha, double p, int quad_order = kDefaultQuadOrder);

// Highest-fixed-point noise-sensitivity bound 1/(1 - Mbar_p(eps)/delta);
// throws std::domain_error when Mbar_p(eps) >= delta.
double noise_sensitivity_bound(double delta, double epsilon, double p,
                               int quad_order = kDefaultQuadOrder);

}  // namespace lpamp
