#include "lpamp/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "lpamp/smooth.hpp"
#include "nlohmann/json.hpp"

namespace lpamp {

namespace {

double golden_min(const std::function<double(double)>& f, double a, double b,
                  double tol) {
  const double gr = 0.6180339887498949;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double golden_min_log(const std::function<double(double)>& f, double lo,
                      double hi, double rel_tol) {
  auto g = [&](double t) { return f(std::exp(t)); };
  return std::exp(golden_min(g, std::log(lo), std::log(hi), rel_tol));
}

struct GridMin {
  double arg = 0.0;
  double value = 0.0;
};

// Log-grid scan followed by golden-section refinement of the bracket.
GridMin minimize_log_grid(const std::function<double(double)>& f, double lo,
                          double hi, int n, double rel_tol) {
  std::vector<double> xs(n), vs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    vs[i] = f(xs[i]);
  }
  const size_t bi = std::min_element(vs.begin(), vs.end()) - vs.begin();
  const double a = xs[bi == 0 ? 0 : bi - 1];
  const double b = xs[std::min(bi + 1, xs.size() - 1)];
  GridMin out;
  out.arg = golden_min_log(f, a, b, rel_tol);
  out.value = f(out.arg);
  if (out.value > vs[bi]) {
    out.arg = xs[bi];
    out.value = vs[bi];
  }
  return out;
}

// ---- disk cache for the expensive saddle computations -------------------

std::mutex cache_mutex;

std::filesystem::path cache_path() {
  const char* dir = std::getenv("LPAMP_CACHE_DIR");
  if (!dir || !*dir) return {};
  return std::filesystem::path(dir) / "minimax_cache.json";
}

bool cache_lookup(const std::string& key, MinimaxResult& out) {
  const auto path = cache_path();
  if (path.empty()) return false;
  std::lock_guard<std::mutex> lock(cache_mutex);
  std::ifstream in(path);
  if (!in) return false;
  nlohmann::json j;
  try {
    in >> j;
  } catch (...) {
    return false;
  }
  if (!j.contains(key)) return false;
  const auto& e = j[key];
  out.value = e.value("value", 0.0);
  out.tau_star = e.value("tau_star", 0.0);
  const std::string mu = e.value("mu_star", "0");
  out.mu_star = mu == "inf" ? kLambdaInf : std::stod(mu);
  return true;
}

void cache_store(const std::string& key, const MinimaxResult& r) {
  const auto path = cache_path();
  if (path.empty()) return;
  std::lock_guard<std::mutex> lock(cache_mutex);
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (in) {
      try {
        in >> j;
      } catch (...) {
        j = nlohmann::json::object();
      }
    }
  }
  std::ostringstream mu;
  if (r.mu_star == kLambdaInf)
    mu << "inf";
  else
    mu << std::setprecision(17) << r.mu_star;
  j[key] = {{"value", r.value}, {"tau_star", r.tau_star}, {"mu_star", mu.str()}};
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(1);
  }
  std::filesystem::rename(tmp, path, ec);  // atomic publish
}

std::string cache_key(const char* op, double p, double epsilon, int order) {
  std::ostringstream os;
  os << op << "|p=" << std::setprecision(17) << p << "|eps=" << epsilon
     << "|ord=" << order;
  return os.str();
}

void check_eps(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("minimax: epsilon must be in [0, 1]");
}

double null_risk(double tau, double p, int order) {
  return unit_risk(tau, p, {}, 0.0, order);  // E eta_p^2(Z; tau)
}

}  // namespace

double inner_risk(double mu, double tau, double p, double epsilon,
                  int quad_order) {
  check_eps(epsilon);
  return unit_risk(tau, p, {{mu, 1.0}}, epsilon, quad_order);
}

double inner_risk_mu_inf(double tau, double p, double epsilon, int quad_order) {
  check_eps(epsilon);
  const double signal = p == 1.0 ? 1.0 + tau * tau : 1.0;
  return (1.0 - epsilon) * null_risk(tau, p, quad_order) + epsilon * signal;
}

double m1_objective(double tau, double epsilon) {
  const double null_term =
      2.0 * (1.0 + tau * tau) * norm_cdf(-tau) - 2.0 * tau * norm_pdf(tau);
  return (1.0 - epsilon) * null_term + epsilon * (1.0 + tau * tau);
}

double m1_tau_star(double epsilon) {
  check_eps(epsilon);
  if (epsilon == 0.0) return kLambdaInf;
  if (epsilon == 1.0) return 0.0;
  auto f = [&](double t) { return m1_objective(t, epsilon); };
  return golden_min(f, 0.0, 40.0, 1e-12);
}

double m1(double epsilon) {
  check_eps(epsilon);
  if (epsilon == 0.0) return 0.0;
  return m1_objective(m1_tau_star(epsilon), epsilon);
}

MinimaxResult m_bar(double p, double epsilon, int quad_order) {
  check_eps(epsilon);
  const std::string key = cache_key("mbar", p, epsilon, quad_order);
  MinimaxResult r;
  if (cache_lookup(key, r)) return r;

  if (epsilon == 0.0) {
    r.value = 0.0;
    r.tau_star = kLambdaInf;
    r.mu_star = 0.0;
    cache_store(key, r);
    return r;
  }

  double mu_at_best = 0.0;
  auto sup_mu = [&](double tau, double* mu_arg) {
    const double inf_term = inner_risk_mu_inf(tau, p, epsilon, quad_order);
    double best = inf_term, best_mu = kLambdaInf;
    const int n = 40;
    double prev_best_mu = 0.0;
    for (int i = 0; i < n; ++i) {
      const double mu = 1e-2 * std::pow(1e5, double(i) / (n - 1));
      const double v = inner_risk(mu, tau, p, epsilon, quad_order);
      if (v > best) {
        best = v;
        best_mu = mu;
        prev_best_mu = mu;
      }
    }
    if (best_mu != kLambdaInf && prev_best_mu > 0.0) {
      auto neg = [&](double mu) {
        return -inner_risk(mu, tau, p, epsilon, quad_order);
      };
      const double lo = prev_best_mu / 1.4, hi = prev_best_mu * 1.4;
      const double mu_ref = golden_min_log(neg, lo, hi, 1e-7);
      const double v = -neg(mu_ref);
      if (v > best) {
        best = v;
        best_mu = mu_ref;
      }
    }
    if (mu_arg) *mu_arg = best_mu;
    return best;
  };

  auto g = [&](double tau) { return sup_mu(tau, nullptr); };
  const GridMin gm = minimize_log_grid(g, 1e-3, 1e3, 40, 1e-9);
  r.tau_star = gm.arg;
  r.value = sup_mu(gm.arg, &mu_at_best);
  r.mu_star = mu_at_best;
  // tau = 0 (identity map, risk exactly 1) beats any threshold when eps = 1.
  if (1.0 < r.value) {
    r.value = 1.0;
    r.tau_star = 0.0;
    r.mu_star = kLambdaInf;
  }
  cache_store(key, r);
  return r;
}

MinimaxResult m_under(double p, double epsilon, int quad_order) {
  check_eps(epsilon);
  const std::string key = cache_key("munder", p, epsilon, quad_order);
  MinimaxResult r;
  if (cache_lookup(key, r)) return r;

  if (epsilon == 0.0) {
    r.value = 0.0;
    r.tau_star = kLambdaInf;
    r.mu_star = 0.0;
    cache_store(key, r);
    return r;
  }

  auto inf_tau = [&](double mu, double* tau_arg) {
    auto f = [&](double tau) {
      return mu == kLambdaInf ? inner_risk_mu_inf(tau, p, epsilon, quad_order)
                              : inner_risk(mu, tau, p, epsilon, quad_order);
    };
    const GridMin gm = minimize_log_grid(f, 1e-3, 1e3, 40, 1e-8);
    // tau = 0 keeps the risk at exactly 1.
    if (tau_arg) *tau_arg = gm.value <= 1.0 ? gm.arg : 0.0;
    return std::min(gm.value, 1.0);
  };

  double best = inf_tau(kLambdaInf, nullptr), best_mu = kLambdaInf;
  const int n = 40;
  for (int i = 0; i < n; ++i) {
    const double mu = 1e-2 * std::pow(1e5, double(i) / (n - 1));
    const double v = inf_tau(mu, nullptr);
    if (v > best) {
      best = v;
      best_mu = mu;
    }
  }
  if (best_mu != kLambdaInf) {
    auto neg = [&](double mu) { return -inf_tau(mu, nullptr); };
    const double mu_ref = golden_min_log(neg, best_mu / 1.4, best_mu * 1.4, 1e-5);
    const double v = -neg(mu_ref);
    if (v > best) {
      best = v;
      best_mu = mu_ref;
    }
  }
  r.value = best;
  r.mu_star = best_mu;
  inf_tau(best_mu, &r.tau_star);
  cache_store(key, r);
  return r;
}

double eps_star_1(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("eps_star_1: delta must be > 0");
  if (delta >= 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (m1(mid) < delta) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double eps_star_p(double delta, double p, MinimaxSide side, int quad_order) {
  if (!(delta > 0.0)) throw std::invalid_argument("eps_star_p: delta must be > 0");
  if (p == 1.0) return eps_star_1(delta);
  if (delta >= 1.0) return 1.0;
  auto value = [&](double eps) {
    return side == MinimaxSide::kBar ? m_bar(p, eps, quad_order).value
                                     : m_under(p, eps, quad_order).value;
  };
  if (value(0.0) > delta)
    throw std::runtime_error("eps_star_p: minimax value not increasing from 0");
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    if (value(mid) < delta) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double continuation_pt(double delta, const std::vector<double>& p_grid,
                       int quad_order) {
  if (p_grid.empty()) throw std::invalid_argument("continuation_pt: empty p grid");
  double best = 0.0;
  for (double p : p_grid)
    best = std::max(best, eps_star_p(delta, p, MinimaxSide::kBar, quad_order));
  return best;
}

double gamma_alpha_p(double alpha, double p, int quad_order) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("gamma_alpha_p: alpha < 0");
  if (alpha == 0.0) return 1.0;
  const double lam = std::pow(alpha / c_p(p), 2.0 - p);
  return null_risk(lam, p, quad_order);
}

double noise_sensitivity_bound(double delta, double epsilon, double p,
                               int quad_order) {
  const double m = p == 1.0 ? m1(epsilon) : m_bar(p, epsilon, quad_order).value;
  if (m >= delta)
    throw std::domain_error("noise_sensitivity_bound: M_bar >= delta");
  return 1.0 / (1.0 - m / delta);
}

}  // namespace lpamp
