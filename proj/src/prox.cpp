#include "lpamp/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpamp {

namespace {

void validate(const ProxParams& params) {
  if (!(params.p >= 0.0 && params.p <= 1.0))
    throw std::invalid_argument("prox: p must be in [0, 1]");
  if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda))
    throw std::invalid_argument("prox: lambda must be finite and >= 0");
}

inline double sgn(double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); }

// Larger root of g(x) = x + lambda*p*x^{p-1} = a on [eta_plus, a], 0 < p < 1.
// g is strictly increasing there, so Newton with a bisection safeguard cannot fail.
double solve_active(double a, double p, double lambda) {
  const double lo = std::pow(2.0 * (1.0 - p) * lambda, 1.0 / (2.0 - p));
  double xl = lo, xh = a;
  const double tol = 1e-12 * std::max(1.0, a);
  auto g = [&](double x) { return x + lambda * p * std::pow(x, p - 1.0) - a; };
  // Asymptotic first guess: x ~ a - lambda*p*a^{p-1}.
  double x = a - lambda * p * std::pow(a, p - 1.0);
  x = std::clamp(x, xl, xh);
  for (int it = 0; it < 200; ++it) {
    const double f = g(x);
    if (std::abs(f) <= tol) return x;
    if (f > 0.0) xh = x; else xl = x;
    const double dg = 1.0 + lambda * p * (p - 1.0) * std::pow(x, p - 2.0);
    double xn = dg > 0.0 ? x - f / dg : xl;
    if (!(xn > xl && xn < xh)) xn = 0.5 * (xl + xh);
    if (xn == x) return x;
    x = xn;
  }
  throw std::runtime_error("prox: root finder failed to converge (bug)");
}

}  // namespace

double c_p(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("c_p: p must be in [0, 1]");
  if (p == 1.0) return 1.0;
  const double b = 2.0 * (1.0 - p);
  return std::pow(b, 1.0 / (2.0 - p)) + p * std::pow(b, (p - 1.0) / (2.0 - p));
}

double zeta_star(const ProxParams& params) {
  validate(params);
  if (params.p <= 0.0 || params.p >= 1.0)
    throw std::domain_error("zeta_star: defined only for 0 < p < 1");
  if (params.lambda == 0.0)
    throw std::domain_error("zeta_star: requires lambda > 0");
  const double p = params.p;
  return std::pow(params.lambda * p * (1.0 - p), 1.0 / (2.0 - p));
}

double threshold(const ProxParams& params) {
  validate(params);
  return c_p(params.p) * std::pow(params.lambda, 1.0 / (2.0 - params.p));
}

double eta_plus(const ProxParams& params) {
  validate(params);
  const double p = params.p;
  if (p == 1.0) return 0.0;
  return std::pow(2.0 * (1.0 - p) * params.lambda, 1.0 / (2.0 - p));
}

ProxEval eta_p(double u, const ProxParams& params) {
  validate(params);
  if (!std::isfinite(u)) throw std::invalid_argument("eta_p: u must be finite");
  const double p = params.p, lambda = params.lambda;
  ProxEval out;

  if (lambda == 0.0) {
    out.value = u;
    out.active = u != 0.0;
    out.d1 = 1.0;
    out.d2 = u == 0.0 ? 0.0 : -p * std::pow(std::abs(u), p - 1.0) * sgn(u);
    return out;
  }

  const double a = std::abs(u);
  const double lt = threshold(params);
  if (a < lt) return out;  // zero output, no derivatives

  // Tie-break at |u| == lambda_tilde: take the nonzero branch (right-closed
  // active set); derivatives stay undefined there.
  if (p == 1.0) {
    out.value = sgn(u) * (a - lambda);
    out.active = a > lambda;
    if (a > lambda) {
      out.d1 = 1.0;
      out.d2 = -sgn(u);
    }
    return out;
  }

  double mag;
  if (p == 0.0) {
    mag = a;
  } else {
    mag = a == lt ? eta_plus(params) : solve_active(a, p, lambda);
  }
  out.value = sgn(u) * mag;
  out.active = true;
  if (a > lt) {
    const double d1 =
        p == 0.0 ? 1.0
                 : 1.0 / (1.0 + lambda * p * (p - 1.0) * std::pow(mag, p - 2.0));
    out.d1 = d1;
    out.d2 = -p * std::pow(mag, p - 1.0) * d1 * sgn(u);
  }
  return out;
}

double d1_eta_p(double u, const ProxParams& params) {
  const ProxEval e = eta_p(u, params);
  if (!e.d1) throw std::domain_error("d1_eta_p: derivative undefined");
  return *e.d1;
}

double d2_eta_p(double u, const ProxParams& params) {
  const ProxEval e = eta_p(u, params);
  if (!e.d2) throw std::domain_error("d2_eta_p: derivative undefined");
  return *e.d2;
}

}  // namespace lpamp
