#include "lpamp/smooth.hpp"

#include <cmath>
#include <stdexcept>

namespace lpamp {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void validate(const SmoothProxParams& params) {
  if (!(params.h > 0.0)) throw std::invalid_argument("smooth: h must be > 0");
}
}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double s_part(double u, const ProxParams& base) {
  if (base.lambda == 0.0) return u;
  const double lt = threshold(base);
  if (std::abs(u) <= lt) return 0.0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  return eta_p(u, base).value - sign * eta_plus(base);
}

double d1_s_part(double u, const ProxParams& base) {
  if (base.lambda == 0.0) return 1.0;
  const double lt = threshold(base);
  const double a = std::abs(u);
  if (a < lt) return 0.0;
  if (a == lt) {
    // Active-side one-sided value: plug the jump magnitude into the
    // derivative formula 1/(1 + lambda*p*(p-1)*eta^{p-2}).
    const double p = base.p;
    if (p == 0.0 || p == 1.0) return 1.0;
    const double mag = eta_plus(base);
    return 1.0 / (1.0 + base.lambda * p * (p - 1.0) * std::pow(mag, p - 2.0));
  }
  return d1_eta_p(u, base);
}

double d_tilde(double u, const SmoothProxParams& params) {
  validate(params);
  const double ep = eta_plus(params.base);
  if (ep == 0.0) return 0.0;
  const double lt = threshold(params.base);
  return ep * (norm_cdf((u - lt) / params.h) - norm_cdf((-lt - u) / params.h));
}

double eta_tilde(double u, const SmoothProxParams& params) {
  return s_part(u, params.base) + d_tilde(u, params);
}

double d1_eta_tilde(double u, const SmoothProxParams& params) {
  validate(params);
  const double ep = eta_plus(params.base);
  double jump = 0.0;
  if (ep != 0.0) {
    const double lt = threshold(params.base);
    jump = ep / params.h *
           (norm_pdf((u - lt) / params.h) + norm_pdf((u + lt) / params.h));
  }
  return d1_s_part(u, params.base) + jump;
}

}  // namespace lpamp
