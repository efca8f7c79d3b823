#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lpamp/minimax.hpp"
#include "lpamp/prox.hpp"
#include "lpamp/se.hpp"
#include "lpamp/smooth.hpp"

using namespace lpamp;

namespace {

// Monte Carlo estimate of E (eta(X + sigma Z) - X)^2 with its standard error.
std::pair<double, double> mc_risk(double sigma, double lambda, double p,
                                  const SignalPrior& prior, double h,
                                  int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto atoms = prior.nonzero_atoms(61);
  std::vector<double> cumw;
  double acc = 0.0;
  for (const auto& [v, w] : atoms) cumw.push_back(acc += w);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    double x = 0.0;
    if (unif(rng) < prior.epsilon) {
      const double u = unif(rng) * acc;
      size_t k = 0;
      while (k + 1 < cumw.size() && cumw[k] < u) ++k;
      x = atoms[k].first;
    }
    const double v = x + sigma * gauss(rng);
    const double y = h > 0.0 ? eta_tilde(v, {{p, lambda}, h})
                             : eta_p(v, {p, lambda}).value;
    const double e = (y - x) * (y - x);
    m1 += e;
    m2 += e * e;
  }
  m1 /= samples;
  m2 /= samples;
  return {m1, std::sqrt(std::max(m2 - m1 * m1, 0.0) / samples)};
}

}  // namespace

TEST_CASE("risk limits") {
  const SignalPrior pr = SignalPrior::two_point(0.1, 1.0);
  // lambda = 0: identity map, risk is the noise power.
  CHECK(risk(0.7, 0.0, 0.5, pr) == doctest::Approx(0.49).epsilon(1e-10));
  // lambda = inf: everything thresholds to zero, risk is E X^2.
  CHECK(risk(0.7, kLambdaInf, 0.5, pr) == doctest::Approx(0.1).epsilon(1e-14));
  // sigma = 0: exact pointwise evaluation at the atoms.
  CHECK(risk(0.0, 0.0, 0.5, pr) == 0.0);
  const double d = eta_p(1.0, {0.5, 0.05}).value - 1.0;
  CHECK(risk(0.0, 0.05, 0.5, pr) == doctest::Approx(0.1 * d * d).epsilon(1e-12));
  // Huge lambda acts like the inf sentinel.
  CHECK(risk(0.7, 1e8, 0.5, pr) == doctest::Approx(0.1).epsilon(1e-10));
}

TEST_CASE("soft threshold risk closed form") {
  // p = 1, null signal: E eta_1^2(sigma Z; lambda) = 2 sigma^2 ((1+tau^2)Phi(-tau) - tau phi(tau)).
  const SignalPrior null = SignalPrior::point_mass(0.0, 1.0);
  for (double tau : {0.3, 1.0, 2.5}) {
    const double sigma = 0.8, lambda = tau * sigma;
    const double expect =
        2.0 * sigma * sigma *
        ((1.0 + tau * tau) * norm_cdf(-tau) - tau * norm_pdf(tau));
    CHECK(risk(sigma, lambda, 1.0, null) == doctest::Approx(expect).epsilon(1e-12));
  }
  // p = 0, null signal: E z^2 1(|z| > t) with t = sqrt(2 lambda)/sigma.
  const double sigma = 1.3, lambda = 0.9;
  const double t = std::sqrt(2.0 * lambda) / sigma;
  const double expect =
      2.0 * sigma * sigma * (norm_cdf(-t) + t * norm_pdf(t));
  CHECK(risk(sigma, lambda, 0.0, null) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("risk against Monte Carlo") {
  const SignalPrior pr = SignalPrior::two_point(0.1, 1.0);
  struct Case { double p, sigma, lambda, h; };
  for (const Case& c : {Case{0.0, 0.7, 0.4, 0.0}, Case{0.5, 0.7, 0.4, 0.0},
                        Case{1.0, 0.7, 0.4, 0.0}, Case{0.5, 0.5, 0.3, 0.05},
                        Case{0.8, 1.2, 0.9, 0.0}}) {
    const double r = risk(c.sigma, c.lambda, c.p, pr, kDefaultQuadOrder, c.h);
    const auto [m, se] = mc_risk(c.sigma, c.lambda, c.p, pr, c.h, 400000, 42);
    INFO("p=", c.p, " sigma=", c.sigma, " lambda=", c.lambda, " h=", c.h);
    CHECK(std::abs(r - m) < 3.0 * se + 1e-12);
  }
  // Gaussian nonzero part.
  const SignalPrior gp = SignalPrior::gaussian(0.2);
  const double r = risk(0.6, 0.5, 0.5, gp);
  const auto [m, se] = mc_risk(0.6, 0.5, 0.5, gp, 0.0, 400000, 7);
  CHECK(std::abs(r - m) < 3.0 * se + 1e-4);  // GH discretization of the prior
}

TEST_CASE("risk scale invariance") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> up(0.05, 1.0);
  std::uniform_real_distribution<double> ua(0.3, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double p = up(rng), alpha = ua(rng);
    const double sigma = 0.6, lambda = 0.4;
    const SignalPrior pr = SignalPrior::with_atoms(0.15, {{0.7, 0.5}, {2.0, 0.5}});
    const SignalPrior prs =
        SignalPrior::with_atoms(0.15, {{0.7 * alpha, 0.5}, {2.0 * alpha, 0.5}});
    const double r = risk(sigma, lambda, p, pr);
    const double rs =
        risk(alpha * sigma, lambda * std::pow(alpha, 2.0 - p), p, prs);
    CHECK(rs == doctest::Approx(alpha * alpha * r).epsilon(1e-10));
  }
}

TEST_CASE("quadrature order consistency") {
  for (double p : {0.3, 0.5, 0.8}) {
    for (double tau : {0.2, 1.0, 5.0}) {
      const double lo = unit_risk(tau, p, {{2.0, 1.0}}, 0.1, 32);
      const double hi = unit_risk(tau, p, {{2.0, 1.0}}, 0.1, 121);
      CHECK(lo == doctest::Approx(hi).epsilon(1e-9));
    }
  }
}

TEST_CASE("oracle threshold") {
  // No signal: threshold everything.
  const PolicyEval none = optimal_lambda(0.5, 0.5, SignalPrior::point_mass(0.0, 1.0));
  CHECK(none.lambda == kLambdaInf);
  CHECK(none.risk_value == 0.0);
  // sigma = 0: identity is exact.
  const PolicyEval zero = optimal_lambda(0.0, 0.5, SignalPrior::two_point(0.1, 1.0));
  CHECK(zero.lambda == 0.0);
  CHECK(zero.risk_value == 0.0);
  // Oracle beats a grid of fixed thresholds.
  const SignalPrior pr = SignalPrior::two_point(0.1, 1.0);
  const PolicyEval pe = optimal_lambda(0.5, 0.5, pr);
  CHECK(pe.risk_value ==
        doctest::Approx(risk(0.5, pe.lambda, 0.5, pr)).epsilon(1e-10));
  for (double lam : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0, 3.0})
    CHECK(pe.risk_value <= risk(0.5, lam, 0.5, pr) + 1e-12);
  // Small-sigma soft-threshold oracle approaches the least-favorable tau.
  const PolicyEval small = optimal_lambda(1e-4, 1.0, pr);
  CHECK(small.tau == doctest::Approx(m1_tau_star(0.1)).epsilon(1e-2));
  CHECK(small.risk_value / (1e-8) == doctest::Approx(m1(0.1)).epsilon(1e-2));
}

TEST_CASE("adaptation dominates each fixed exponent") {
  const SignalPrior pr = SignalPrior::two_point(0.1, 1.0);
  const std::vector<double> grid = {0.0, 0.3, 0.6, 1.0};
  for (double sigma : {0.05, 0.3, 1.0}) {
    const PolicyEval best = optimal_adaptation(sigma, pr, grid);
    for (double p : grid)
      CHECK(best.risk_value <= optimal_lambda(sigma, p, pr).risk_value + 1e-12);
  }
}

TEST_CASE("se map basics") {
  SEConfig cfg;
  cfg.delta = 0.2;
  cfg.sigma_w = 0.1;
  cfg.prior = SignalPrior::point_mass(0.0, 1.0);
  const Policy po = Policy::optimal_lambda_policy(1.0);
  // No signal: psi is constant at sigma_w^2.
  CHECK(psi(0.5, po, cfg) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(psi(0.0, po, cfg) == doctest::Approx(0.01).epsilon(1e-12));
  // Noiseless with signal: psi(0) = 0.
  cfg.sigma_w = 0.0;
  cfg.prior = SignalPrior::two_point(0.1, 1.0);
  CHECK(psi(0.0, po, cfg) == 0.0);
  // Fixed-lambda policy reduces to the plain risk map.
  const Policy pf = Policy::fixed_lambda(1.0, 0.3);
  CHECK(psi(0.25, pf, cfg) ==
        doctest::Approx(risk(0.5, 0.3, 1.0, cfg.prior) / 0.2).epsilon(1e-12));
  // Power law lambda = tau * sigma^q.
  const Policy pp = Policy::power_law(0.5, 0.4, 0.5);
  CHECK(psi(0.25, pp, cfg) ==
        doctest::Approx(risk(0.5, 0.4 * std::sqrt(0.5), 0.5, cfg.prior) / 0.2)
            .epsilon(1e-12));
}

TEST_CASE("small-sigma slope of the optimal map") {
  // For p < 1 the optimally tuned unit risk tends to eps as sigma -> 0, so
  // psi(s)/s -> eps/delta in the noiseless problem.
  SEConfig cfg;
  cfg.delta = 0.3;
  cfg.sigma_w = 0.0;
  cfg.prior = SignalPrior::two_point(0.05, 1.0);
  for (double p : {0.0, 0.5}) {
    const Policy po = Policy::optimal_lambda_policy(p);
    const double s = 1e-10;
    CHECK(psi(s, po, cfg) / s ==
          doctest::Approx(0.05 / 0.3).epsilon(0.05));
  }
}

TEST_CASE("iteration settles at stable fixed points") {
  SEConfig cfg;
  cfg.delta = 0.3;
  cfg.sigma_w = 0.0;
  cfg.prior = SignalPrior::two_point(0.05, 1.0);
  const Policy po = Policy::optimal_lambda_policy(1.0);
  const double s0 = cfg.prior.second_moment() / cfg.delta;
  const Trajectory down = iterate(cfg, po, s0, 400);
  CHECK(down.converged);
  CHECK(down.sigma_sq.back() < 1e-9);
  CHECK(lowest_stable_fp(cfg, po) == 0.0);
  CHECK(highest_stable_fp(cfg, po) == 0.0);

  // Above the transition the iteration sticks at a positive fixed point.
  cfg.prior = SignalPrior::two_point(0.25, 1.0);
  const Trajectory stuck = iterate(cfg, po, cfg.prior.second_moment() / cfg.delta, 400);
  CHECK(stuck.converged);
  CHECK(stuck.sigma_sq.back() > 1e-4);
  const double hi = highest_stable_fp(cfg, po);
  CHECK(hi == doctest::Approx(stuck.sigma_sq.back()).epsilon(1e-4));
  CHECK(psi(hi, po, cfg) == doctest::Approx(hi).epsilon(1e-6));
}

TEST_CASE("fixed point classification") {
  SEConfig cfg;
  cfg.delta = 0.2;
  cfg.sigma_w = 0.1;
  cfg.prior = SignalPrior::point_mass(0.0, 1.0);
  const Policy po = Policy::optimal_lambda_policy(1.0);
  // Constant map: single stable point at sigma_w^2.
  FixedPointReport rep = fixed_points(cfg, po);
  REQUIRE(rep.points.size() == 1);
  CHECK(rep.points[0].cls == FixedPointClass::kStable);
  CHECK(rep.points[0].sigma_sq == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(rep.lowest_stable == doctest::Approx(0.01).epsilon(1e-6));

  // Noiseless subcritical: zero is the unique stable point.
  cfg.sigma_w = 0.0;
  cfg.delta = 0.3;
  cfg.prior = SignalPrior::two_point(0.05, 1.0);
  rep = fixed_points(cfg, po);
  REQUIRE(!rep.points.empty());
  CHECK(rep.points[0].sigma_sq == 0.0);
  CHECK(rep.points[0].cls == FixedPointClass::kStable);
  CHECK(rep.lowest_stable == 0.0);

  // Noiseless supercritical: zero fixed but unstable, a stable point above.
  cfg.delta = 0.2;
  cfg.prior = SignalPrior::two_point(0.25, 1.0);
  rep = fixed_points(cfg, po);
  REQUIRE(rep.points.size() >= 2);
  CHECK(rep.points[0].sigma_sq == 0.0);
  CHECK(rep.points[0].cls == FixedPointClass::kUnstable);
  CHECK(rep.points.back().cls == FixedPointClass::kStable);
  CHECK(rep.highest_stable ==
        doctest::Approx(highest_stable_fp(cfg, po)).epsilon(1e-5));
  // Alternation holds in every report.
  for (size_t i = 0; i + 1 < rep.points.size(); ++i)
    CHECK(rep.points[i].cls != rep.points[i + 1].cls);
}

TEST_CASE("noisy soft threshold map has a unique stable point") {
  const Policy po = Policy::optimal_lambda_policy(1.0);
  for (double delta : {0.2, 0.5}) {
    for (double eps : {0.05, 0.2}) {
      SEConfig cfg;
      cfg.delta = delta;
      cfg.sigma_w = 0.1;
      cfg.prior = SignalPrior::two_point(eps, 1.0);
      const FixedPointReport rep = fixed_points(cfg, po);
      int stable = 0;
      for (const auto& fp : rep.points)
        stable += fp.cls == FixedPointClass::kStable;
      CHECK(stable == 1);
      CHECK(rep.lowest_stable == doctest::Approx(rep.highest_stable));
    }
  }
}

TEST_CASE("config validation") {
  SEConfig cfg;
  cfg.delta = 0.0;
  CHECK_THROWS(cfg.check());
  cfg.delta = 0.2;
  cfg.sigma_w = -1.0;
  CHECK_THROWS(cfg.check());
  cfg.sigma_w = 0.0;
  cfg.quad_order = 4;
  CHECK_THROWS(cfg.check());
  cfg.quad_order = 61;
  CHECK_NOTHROW(cfg.check());
  CHECK_THROWS(risk(-1.0, 0.1, 0.5, SignalPrior::two_point(0.1, 1.0)));
}
