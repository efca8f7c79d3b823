#pragma once

#include "lpamp/prox.hpp"

namespace lpamp {

struct SmoothProxParams {
  ProxParams base;
  double h;  // smoothing bandwidth, > 0
};

// Standard normal pdf/cdf used throughout.
double norm_pdf(double x);
double norm_cdf(double x);

// Continuous part: S_p(u) = eta_p(u) - sign(u)*eta_plus for |u| > threshold, else 0.
double s_part(double u, const ProxParams& base);

// One-sided derivative of S_p; at |u| == threshold the active-side value is used.
double d1_s_part(double u, const ProxParams& base);

// Gaussian-mollified jump:
//   D_tilde(u) = eta_plus*Phi((u - lt)/h) - eta_plus*Phi((-lt - u)/h),
// odd in u, bounded by eta_plus, recovering the jump part of eta_p as h -> 0.
double d_tilde(double u, const SmoothProxParams& params);

// Smoothed threshold function eta_tilde = S_p + D_tilde and its u-derivative.
double eta_tilde(double u, const SmoothProxParams& params);
double d1_eta_tilde(double u, const SmoothProxParams& params);

}  // namespace lpamp
