#include "lpamp/se.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

#include "lpamp/prox.hpp"
#include "lpamp/smooth.hpp"

namespace lpamp {

namespace {

// Gaussian tail mass above b.
inline double q_tail(double b) { return norm_cdf(-b); }

// int_b^inf (z - a)^2 phi(z) dz
inline double tail_sq_moment(double b, double a) {
  return (1.0 + a * a) * q_tail(b) + (b - 2.0 * a) * norm_pdf(b);
}

// Base panel edges clustered by Gaussian mass; |z| > 38 underflows phi.
const std::vector<double>& base_edges() {
  static const std::vector<double> edges = [] {
    std::vector<double> half = {0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.5, 3.0,
                                3.5,  4.0, 5.0, 6.0, 7.0, 8.5, 10.0, 12.0,
                                15.0, 19.0, 24.0, 30.0, 38.0};
    std::vector<double> all;
    for (double e : half) {
      all.push_back(e);
      if (e != 0.0) all.push_back(-e);
    }
    std::sort(all.begin(), all.end());
    return all;
  }();
  return edges;
}

// Magnitude of eta_p on the active branch, guarding nodes that round to just
// below the threshold.
double eta_active_mag(double a, double p, double tau, double lt, double ep) {
  if (p == 0.0) return a;
  if (p == 1.0) return std::max(a - tau, 0.0);
  if (a <= lt) return ep;
  ProxParams params{p, tau};
  return std::abs(eta_p(a, params).value);
}

// Unit-noise risk of a single signal atom at x (>= 0 wlog by oddness):
// E (eta(x + Z; tau) - x)^2, Z ~ N(0,1); eta_tilde with bandwidth h if h > 0.
double atom_unit_risk(double x, double tau, double p, int nodes_per_panel,
                      double h) {
  x = std::min(std::abs(x), 1e150);
  const ProxParams params{p, tau};
  const double lt = tau == 0.0 ? 0.0 : threshold(params);
  // Far from the threshold the boundary terms vanish to double precision and
  // the atom risk has closed large-signal limits: x^2 when fully thresholded,
  // shrinkage bias^2 plus the passed noise variance d1^2 when fully active.
  if (x > 1e8) {
    const double margin = 38.0 + 80.0 * h;
    if (x < lt - margin) return x * x;
    if (x > lt + margin) {
      const double bias = x - eta_p(x, params).value;
      const double d1 = d1_eta_p(x, params);
      return bias * bias + d1 * d1;
    }
  }
  const double b1 = -lt - x, b2 = lt - x;

  if (h == 0.0) {
    if (p == 1.0) {
      return x * x * (norm_cdf(b2) - norm_cdf(b1)) + tail_sq_moment(b2, tau) +
             tail_sq_moment(-b1, tau);
    }
    if (p == 0.0) {
      return x * x * (norm_cdf(b2) - norm_cdf(b1)) + tail_sq_moment(b2, 0.0) +
             tail_sq_moment(-b1, 0.0);
    }
  }

  std::vector<double> edges = base_edges();
  auto add_edge = [&](double e) {
    if (e > -38.0 && e < 38.0) edges.push_back(e);
  };
  add_edge(b1);
  add_edge(b2);
  if (h > 0.0) {
    static const double offs[] = {-64, -32, -16, -8, -4, -2, -1, 1, 2, 4, 8, 16, 32, 64};
    for (double k : offs) {
      add_edge(b1 + k * h);
      add_edge(b2 + k * h);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<double> gl_x, gl_w;
  gauss_legendre(nodes_per_panel, gl_x, gl_w);

  const double ep = eta_plus(params);
  const SmoothProxParams sp{params, h};

  double total = 0.0;
  bool analytic_inactive = h == 0.0;
  if (analytic_inactive && b2 > b1)
    total += x * x * (norm_cdf(b2) - norm_cdf(b1));

  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const double zl = edges[i], zr = edges[i + 1];
    const double zm = 0.5 * (zl + zr);
    if (analytic_inactive && zm > b1 && zm < b2) continue;  // handled via Phi
    const double amin = (zl <= 0.0 && zr >= 0.0)
                            ? 0.0
                            : std::min(std::abs(zl), std::abs(zr));
    const double zmax = std::max(std::abs(zl), std::abs(zr));
    if (norm_pdf(amin) * (1.0 + x * x + zmax * zmax) < 1e-26) continue;
    const double hw = 0.5 * (zr - zl);
    double acc = 0.0;
    for (int k = 0; k < nodes_per_panel; ++k) {
      const double z = zm + hw * gl_x[k];
      const double u = x + z;
      double d;
      if (h > 0.0) {
        d = eta_tilde(u, sp) - x;
      } else {
        const double sgn = u < 0.0 ? -1.0 : 1.0;
        d = sgn * eta_active_mag(std::abs(u), p, tau, lt, ep) - x;
      }
      acc += gl_w[k] * d * d * norm_pdf(z);
    }
    total += hw * acc;
  }
  return total;
}

std::vector<std::pair<double, double>> fold_by_magnitude(
    const std::vector<std::pair<double, double>>& atoms) {
  std::map<double, double> m;
  for (const auto& [v, w] : atoms) m[std::abs(v)] += w;
  return {m.begin(), m.end()};
}

int panel_nodes(int quad_order) {
  if (quad_order < 8) throw std::invalid_argument("risk: quadrature order < 8");
  return std::clamp(quad_order / 4, 8, 32);
}

std::atomic<bool> warned_multimodal{false};

void warn_multimodal(const char* what) {
  if (!warned_multimodal.exchange(true))
    std::fprintf(stderr,
                 "lpamp: warning: %s objective is not quasi-convex on the "
                 "search grid; using the best local minimum\n",
                 what);
}

// Golden-section minimization in log space on [lo, hi].
double golden_min_log(const std::function<double(double)>& f, double lo,
                      double hi, double rel_tol) {
  const double gr = 0.6180339887498949;
  double a = std::log(lo), b = std::log(hi);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(std::exp(c)), fd = f(std::exp(d));
  while (b - a > rel_tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(std::exp(d));
    }
  }
  return std::exp(0.5 * (a + b));
}

}  // namespace

void SEConfig::check() const {
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("se: delta must be in (0, 1]");
  if (!(sigma_w >= 0.0))
    throw std::invalid_argument("se: sigma_w must be >= 0");
  if (quad_order < 8)
    throw std::invalid_argument("se: quadrature order < 8");
  prior.check();
}

double unit_risk(double tau, double p,
                 const std::vector<std::pair<double, double>>& unit_atoms,
                 double epsilon, int quad_order, double h_unit) {
  const int nodes = panel_nodes(quad_order);
  double total = (1.0 - epsilon) * atom_unit_risk(0.0, tau, p, nodes, h_unit);
  for (const auto& [v, w] : unit_atoms)
    if (w > 0.0) total += epsilon * w * atom_unit_risk(v, tau, p, nodes, h_unit);
  return total;
}

double risk(double sigma, double lambda, double p, const SignalPrior& prior,
            int quad_order, double h) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("risk: sigma must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("risk: lambda must be >= 0");
  if (quad_order < 8) throw std::invalid_argument("risk: quadrature order < 8");
  prior.check();
  if (lambda == kLambdaInf) return prior.second_moment();

  const auto atoms = fold_by_magnitude(prior.nonzero_atoms(quad_order));

  if (sigma == 0.0) {
    double total = 0.0;
    const ProxParams params{p, lambda};
    const SmoothProxParams sp{params, h};
    for (const auto& [v, w] : atoms) {
      const double d = (h > 0.0 ? eta_tilde(v, sp) : eta_p(v, params).value) - v;
      total += prior.epsilon * w * d * d;
    }
    return total;
  }

  const double tau = lambda / std::pow(sigma, 2.0 - p);
  std::vector<std::pair<double, double>> unit_atoms;
  unit_atoms.reserve(atoms.size());
  for (const auto& [v, w] : atoms) unit_atoms.emplace_back(v / sigma, w);
  return sigma * sigma *
         unit_risk(tau, p, unit_atoms, prior.epsilon, quad_order, h / sigma);
}

Policy Policy::fixed_lambda(double p, double lambda) {
  Policy po;
  po.kind = Kind::kFixedLambda;
  po.p = p;
  po.lambda = lambda;
  return po;
}

Policy Policy::power_law(double p, double tau, double q) {
  Policy po;
  po.kind = Kind::kPowerLaw;
  po.p = p;
  po.tau = tau;
  po.q = q;
  return po;
}

Policy Policy::optimal_lambda_policy(double p) {
  Policy po;
  po.kind = Kind::kOptimalLambda;
  po.p = p;
  return po;
}

Policy Policy::optimal_adapt(std::vector<double> p_grid) {
  Policy po;
  po.kind = Kind::kOptimalAdapt;
  po.p_grid = std::move(p_grid);
  return po;
}

PolicyEval optimal_lambda(double sigma, double p, const SignalPrior& prior,
                          int quad_order) {
  prior.check();
  PolicyEval out;
  out.p = p;
  const auto atoms = fold_by_magnitude(prior.nonzero_atoms(quad_order));
  const bool no_signal = prior.epsilon == 0.0 || atoms.empty();
  if (no_signal) {
    out.lambda = kLambdaInf;
    out.tau = kLambdaInf;
    out.risk_value = 0.0;
    return out;
  }
  if (sigma == 0.0) {
    out.lambda = 0.0;
    out.tau = 0.0;
    out.risk_value = 0.0;
    return out;
  }

  std::vector<std::pair<double, double>> unit_atoms;
  unit_atoms.reserve(atoms.size());
  for (const auto& [v, w] : atoms) unit_atoms.emplace_back(v / sigma, w);
  auto f = [&](double tau) {
    return unit_risk(tau, p, unit_atoms, prior.epsilon, quad_order);
  };

  double lo = 1e-3, hi = 1e3;
  const int n = 60;
  std::vector<double> taus, vals;
  auto scan = [&]() {
    taus.clear();
    vals.clear();
    for (int i = 0; i < n; ++i) {
      const double t = lo * std::pow(hi / lo, double(i) / (n - 1));
      taus.push_back(t);
      vals.push_back(f(t));
    }
  };
  scan();
  auto best = [&]() {
    return std::min_element(vals.begin(), vals.end()) - vals.begin();
  };
  size_t bi = best();
  for (int tries = 0; tries < 2 && (bi == 0 || bi + 1 == taus.size()); ++tries) {
    if (bi == 0) lo = std::max(lo * 1e-3, 1e-6);
    if (bi + 1 == taus.size()) hi = std::min(hi * 1e3, 1e6);
    scan();
    bi = best();
  }

  int local_minima = 0;
  for (size_t i = 1; i + 1 < vals.size(); ++i)
    if (vals[i] < vals[i - 1] && vals[i] < vals[i + 1]) ++local_minima;
  if (local_minima > 1) warn_multimodal("threshold-risk");

  const double bracket_lo = taus[bi == 0 ? 0 : bi - 1];
  const double bracket_hi = taus[std::min(bi + 1, taus.size() - 1)];
  const double tau_star = golden_min_log(f, bracket_lo, bracket_hi, 1e-8);
  out.tau = tau_star;
  out.lambda = tau_star * std::pow(sigma, 2.0 - p);
  out.risk_value = sigma * sigma * f(tau_star);
  return out;
}

PolicyEval optimal_adaptation(double sigma, const SignalPrior& prior,
                              const std::vector<double>& p_grid, int quad_order) {
  if (p_grid.empty())
    throw std::invalid_argument("optimal_adaptation: empty p grid");
  PolicyEval best;
  bool first = true;
  for (double p : p_grid) {
    PolicyEval pe = optimal_lambda(sigma, p, prior, quad_order);
    if (first || pe.risk_value < best.risk_value) {
      best = pe;
      first = false;
    }
  }
  return best;
}

PolicyEval resolve_policy(const Policy& policy, double sigma,
                          const SignalPrior& prior, int quad_order) {
  PolicyEval pe;
  switch (policy.kind) {
    case Policy::Kind::kFixedLambda:
      pe.p = policy.p;
      pe.lambda = policy.lambda;
      pe.tau = sigma > 0.0 ? policy.lambda / std::pow(sigma, 2.0 - policy.p)
                           : 0.0;
      pe.risk_value = std::numeric_limits<double>::quiet_NaN();
      return pe;
    case Policy::Kind::kPowerLaw:
      pe.p = policy.p;
      pe.lambda = policy.tau * std::pow(sigma, policy.q);
      pe.tau = sigma > 0.0 ? pe.lambda / std::pow(sigma, 2.0 - policy.p) : 0.0;
      pe.risk_value = std::numeric_limits<double>::quiet_NaN();
      return pe;
    case Policy::Kind::kOptimalLambda:
      return optimal_lambda(sigma, policy.p, prior, quad_order);
    case Policy::Kind::kOptimalAdapt:
      return optimal_adaptation(sigma, prior, policy.p_grid, quad_order);
  }
  throw std::logic_error("policy: unreachable");
}

double psi(double sigma_sq, const Policy& policy, const SEConfig& config) {
  config.check();
  if (!(sigma_sq >= 0.0)) throw std::invalid_argument("psi: sigma_sq < 0");
  const double sigma = std::sqrt(sigma_sq);
  const PolicyEval pe = resolve_policy(policy, sigma, config.prior, config.quad_order);
  const double r = std::isnan(pe.risk_value)
                       ? risk(sigma, pe.lambda, pe.p, config.prior, config.quad_order)
                       : pe.risk_value;
  return config.sigma_w * config.sigma_w + r / config.delta;
}

Trajectory iterate(const SEConfig& config, const Policy& policy, double sigma0_sq,
                   int max_iters, double tol) {
  Trajectory traj;
  double s = sigma0_sq;
  traj.sigma_sq.push_back(s);
  for (int t = 0; t < max_iters; ++t) {
    const double sn = psi(s, policy, config);
    traj.sigma_sq.push_back(sn);
    if (std::abs(sn - s) < tol * std::max(s, tol)) {
      traj.converged = true;
      break;
    }
    s = sn;
  }
  return traj;
}

double sigma_sq_ceiling(const SEConfig& config) {
  return (config.prior.second_moment() + 1.0) / config.delta +
         config.sigma_w * config.sigma_w + 1.0;
}

std::string to_string(FixedPointClass cls) {
  switch (cls) {
    case FixedPointClass::kStable: return "stable";
    case FixedPointClass::kUnstable: return "unstable";
    case FixedPointClass::kHalfStable: return "half-stable";
  }
  return "?";
}

namespace {

// Zero clause of the stability definitions: 0 is a fixed point iff psi(0) = 0,
// and is stable iff psi stays below the identity just above 0.
bool zero_is_fixed(const SEConfig& config, const Policy& policy) {
  return psi(0.0, policy, config) == 0.0;
}

bool zero_is_stable(const SEConfig& config, const Policy& policy) {
  const double probe = 1e-8 * sigma_sq_ceiling(config);
  return psi(probe, policy, config) / probe < 1.0 - 1e-6;
}

}  // namespace

FixedPointReport fixed_points(const SEConfig& config, const Policy& policy,
                              double sigma_sq_max, int grid_points) {
  config.check();
  const double smax = sigma_sq_max > 0.0 ? sigma_sq_max : sigma_sq_ceiling(config);
  FixedPointReport report;

  auto phi_d = [&](double s) { return psi(s, policy, config) - s; };

  for (int attempt = 0; attempt < 3; ++attempt) {
    report.points.clear();
    const int n = grid_points << (2 * attempt);
    const int n_log = n / 2, n_lin = n - n_log;
    std::vector<double> grid;
    grid.reserve(n);
    const double slo = smax * 1e-10;
    for (int i = 0; i < n_log; ++i)
      grid.push_back(slo * std::pow(smax / slo, double(i) / (n_log - 1)));
    for (int i = 1; i <= n_lin; ++i) grid.push_back(smax * double(i) / n_lin);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<double> fv(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) fv[i] = phi_d(grid[i]);

    const double touch_tol = 1e-9 * smax;
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
      const double fl = fv[i], fr = fv[i + 1];
      if (fl == 0.0) continue;  // exact grid hits are picked up by the bracket
      if (fl * fr < 0.0) {
        double a = grid[i], b = grid[i + 1], fa = fl;
        while (b - a > 1e-10 * b) {
          const double m = 0.5 * (a + b);
          const double fm = phi_d(m);
          if (fm == 0.0) { a = b = m; break; }
          if (fa * fm < 0.0) b = m; else { a = m; fa = fm; }
        }
        FixedPoint fp;
        fp.sigma_sq = 0.5 * (a + b);
        fp.cls = fl > 0.0 ? FixedPointClass::kStable : FixedPointClass::kUnstable;
        report.points.push_back(fp);
      } else if (std::abs(fl) < touch_tol && std::abs(fr) < touch_tol &&
                 std::abs(fl) < 1e-4 * grid[i] && std::abs(fr) < 1e-4 * grid[i + 1]) {
        // Identical signs but psi grazes the identity: half-stable candidate.
        if (!report.points.empty() &&
            std::abs(report.points.back().sigma_sq - grid[i]) < 1e-6 * smax)
          continue;
        FixedPoint fp;
        fp.sigma_sq = 0.5 * (grid[i] + grid[i + 1]);
        fp.cls = FixedPointClass::kHalfStable;
        report.points.push_back(fp);
        report.warnings.push_back("half-stable fixed point detected near sigma_sq=" +
                                  std::to_string(fp.sigma_sq));
      }
    }

    if (zero_is_fixed(config, policy)) {
      FixedPoint fp;
      fp.sigma_sq = 0.0;
      fp.cls = zero_is_stable(config, policy) ? FixedPointClass::kStable
                                              : FixedPointClass::kUnstable;
      report.points.insert(report.points.begin(), fp);
    }

    // Stable/unstable fixed points must alternate along sigma^2; a violation
    // means the grid stepped over a root pair.
    bool consistent = !report.points.empty();
    for (size_t i = 0; i + 1 < report.points.size(); ++i) {
      const auto a = report.points[i].cls, b = report.points[i + 1].cls;
      if (a != FixedPointClass::kHalfStable && a == b) consistent = false;
    }
    bool any_stable = false;
    for (const auto& fp : report.points)
      any_stable |= fp.cls == FixedPointClass::kStable;
    if ((consistent && any_stable) || attempt == 2) {
      if (!consistent)
        report.warnings.push_back("grid too coarse to separate fixed points");
      if (!any_stable)
        report.warnings.push_back("no stable fixed point located");
      break;
    }
    report.warnings.push_back("refining fixed-point grid (x4 density)");
  }

  for (const auto& fp : report.points) {
    if (fp.cls != FixedPointClass::kStable) continue;
    if (std::isnan(report.lowest_stable)) report.lowest_stable = fp.sigma_sq;
    report.highest_stable = fp.sigma_sq;
  }
  return report;
}

namespace {

double settle(const SEConfig& config, const Policy& policy, double start) {
  auto f = [&](double s) { return psi(s, policy, config) - s; };
  double s = start;
  double s_prev = -1.0, f_prev = 0.0;
  for (int t = 0; t < 5000; ++t) {
    const double fs = f(s);
    double sn = s + fs;
    if (sn < 0.0) sn = 0.0;
    if (sn < 1e-280) return 0.0;  // geometric decay to the zero fixed point
    if (std::abs(sn - s) <= 1e-14 * std::max(s, 1e-300)) return sn;
    // Secant refinement once the map contracts slowly.
    if (s_prev >= 0.0 && t > 10) {
      const double denom = fs - f_prev;
      if (denom != 0.0) {
        const double cand = s - fs * (s - s_prev) / denom;
        if (cand > 0.0 && std::isfinite(cand) &&
            std::abs(cand - s) < 8.0 * std::abs(s - s_prev)) {
          const double fc = f(cand);
          if (std::abs(fc) < std::abs(fs)) {
            s_prev = s;
            f_prev = fs;
            s = cand;
            if (std::abs(fc) <= 1e-15 * std::max(s, 1e-300)) return s;
            continue;
          }
        }
      }
    }
    s_prev = s;
    f_prev = fs;
    s = sn;
  }
  return s;
}

}  // namespace

double lowest_stable_fp(const SEConfig& config, const Policy& policy) {
  config.check();
  if (config.sigma_w == 0.0 && zero_is_fixed(config, policy) &&
      zero_is_stable(config, policy))
    return 0.0;
  return settle(config, policy, 0.0);
}

double highest_stable_fp(const SEConfig& config, const Policy& policy) {
  config.check();
  const double s = settle(config, policy, sigma_sq_ceiling(config));
  if (s <= 1e-13 * sigma_sq_ceiling(config) && config.sigma_w == 0.0) return 0.0;
  return s;
}

}  // namespace lpamp
