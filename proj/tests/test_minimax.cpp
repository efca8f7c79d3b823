#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "lpamp/minimax.hpp"
#include "lpamp/smooth.hpp"

using namespace lpamp;

TEST_CASE("inner risk basics") {
  // tau = 0 is the identity map: risk 1 regardless of mu, p, eps.
  CHECK(inner_risk(1.0, 0.0, 0.5, 0.3) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(inner_risk(3.0, 0.0, 1.0, 0.7) == doctest::Approx(1.0).epsilon(1e-10));
  // mu = 0 collapses the mixture: the eps split has no effect.
  CHECK(inner_risk(0.0, 0.8, 0.5, 0.3) ==
        doctest::Approx(inner_risk(0.0, 0.8, 0.5, 0.7)).epsilon(1e-12));
  // Soft threshold: risk grows in mu toward the 1 + tau^2 limit.
  const double tau = 1.2, eps = 0.1;
  double prev = inner_risk(0.5, tau, 1.0, eps);
  for (double mu : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    const double v = inner_risk(mu, tau, 1.0, eps);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  CHECK(prev <= inner_risk_mu_inf(tau, 1.0, eps) + 1e-12);
  CHECK(inner_risk(40.0, tau, 1.0, eps) ==
        doctest::Approx(inner_risk_mu_inf(tau, 1.0, eps)).epsilon(1e-9));
  // For p < 1 the large-mu limit carries no threshold bias.
  CHECK(inner_risk(1e7, 2.0, 0.5, eps) ==
        doctest::Approx(inner_risk_mu_inf(2.0, 0.5, eps)).epsilon(1e-5));
}

TEST_CASE("soft threshold minimax closed form") {
  CHECK(m1(0.0) == 0.0);
  CHECK(m1(1.0) == doctest::Approx(1.0).epsilon(1e-9));
  // Monotone in eps.
  double prev = 0.0;
  for (double eps : {0.01, 0.05, 0.1, 0.3, 0.6, 0.9}) {
    const double v = m1(eps);
    CHECK(v > prev);
    CHECK(v < 1.0 + 1e-12);
    prev = v;
  }
  // tau_star minimizes the closed-form objective.
  const double eps = 0.1, ts = m1_tau_star(eps);
  auto obj = [&](double t) {
    const double null_term =
        2.0 * (1.0 + t * t) * norm_cdf(-t) - 2.0 * t * norm_pdf(t);
    return (1.0 - eps) * null_term + eps * (1.0 + t * t);
  };
  CHECK(obj(ts) == doctest::Approx(m1(eps)).epsilon(1e-12));
  const double d = 1e-4;
  CHECK(obj(ts + d) >= m1(eps) - 1e-12);
  CHECK(obj(ts - d) >= m1(eps) - 1e-12);
}

TEST_CASE("generic saddle matches the closed form at p = 1") {
  for (double eps : {0.05, 0.3}) {
    const MinimaxResult r = m_bar(1.0, eps);
    CHECK(r.value == doctest::Approx(m1(eps)).epsilon(1e-6));
    CHECK(r.tau_star == doctest::Approx(m1_tau_star(eps)).epsilon(1e-3));
    CHECK(r.mu_star == kLambdaInf);  // least favorable signal escapes to infinity
  }
}

TEST_CASE("weak duality and extremes") {
  for (double p : {0.0, 0.5}) {
    for (double eps : {0.1, 0.3}) {
      const MinimaxResult lo = m_under(p, eps, 32);
      const MinimaxResult hi = m_bar(p, eps, 32);
      INFO("p=", p, " eps=", eps);
      CHECK(lo.value <= hi.value + 1e-6);
      CHECK(hi.value > 0.0);
      CHECK(hi.value < 1.0);
    }
  }
  // eps = 1: no zero mass to exploit, the value saturates at 1.
  CHECK(m_bar(0.5, 1.0, 32).value == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(m_bar(0.5, 0.0, 32).value == 0.0);
}

TEST_CASE("phase transition curves") {
  CHECK(eps_star_1(1.0) == 1.0);
  const double es = eps_star_1(0.3);
  CHECK(m1(es) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(eps_star_1(0.1) < es);
  CHECK(eps_star_p(0.3, 1.0, MinimaxSide::kBar) == doctest::Approx(es).epsilon(1e-8));
  // p < 1 self-consistency at reduced quadrature order.
  const double e5 = eps_star_p(0.3, 0.5, MinimaxSide::kBar, 32);
  CHECK(m_bar(0.5, e5, 32).value == doctest::Approx(0.3).epsilon(5e-3));
  // The continuation transition takes the best exponent in the grid.
  const double cp = continuation_pt(0.3, {0.5, 1.0}, 32);
  CHECK(cp == doctest::Approx(std::max(e5, es)).epsilon(1e-3));
}

TEST_CASE("large-noise constant") {
  CHECK(gamma_alpha_p(0.0, 0.5) == 1.0);
  CHECK(gamma_alpha_p(37.0, 0.0) < 1e-200);
  // Gamma_{1,0} = E Z^2 1(|Z| > 1) = 2(Q(1) + phi(1)).
  const double expect = 2.0 * (norm_cdf(-1.0) + norm_pdf(1.0));
  CHECK(gamma_alpha_p(1.0, 0.0) == doctest::Approx(expect).epsilon(1e-10));
  // At matched thresholds, stronger shrinkage keeps less of the null noise.
  const double g1 = gamma_alpha_p(2.0, 1.0);
  const double g5 = gamma_alpha_p(2.0, 0.5);
  const double g0 = gamma_alpha_p(2.0, 0.0);
  CHECK(g1 < g5);
  CHECK(g5 < g0);
  CHECK_THROWS(gamma_alpha_p(-1.0, 0.5));
}

TEST_CASE("noise sensitivity bound") {
  const double eps = 0.05, delta = 0.3;
  CHECK(noise_sensitivity_bound(delta, eps, 1.0) ==
        doctest::Approx(1.0 / (1.0 - m1(eps) / delta)).epsilon(1e-12));
  CHECK_THROWS_AS(noise_sensitivity_bound(0.01, 0.5, 1.0), std::domain_error);
}

TEST_CASE("disk cache round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lpamp_cache_test";
  std::filesystem::remove_all(dir);
  setenv("LPAMP_CACHE_DIR", dir.c_str(), 1);
  const MinimaxResult a = m_bar(0.4, 0.17, 32);
  CHECK(std::filesystem::exists(dir / "minimax_cache.json"));
  const MinimaxResult b = m_bar(0.4, 0.17, 32);  // served from the cache
  CHECK(a.value == b.value);
  CHECK(a.tau_star == b.tau_star);
  CHECK(a.mu_star == b.mu_star);
  unsetenv("LPAMP_CACHE_DIR");
  std::filesystem::remove_all(dir);
}
