#include "lpamp/prior.hpp"

#include <cmath>
#include <mutex>
#include <map>
#include <stdexcept>

namespace lpamp {

SignalPrior SignalPrior::point_mass(double epsilon, double mu) {
  SignalPrior pr;
  pr.epsilon = epsilon;
  pr.kind = Nonzero::kPointMass;
  pr.mu = mu;
  pr.check();
  return pr;
}

SignalPrior SignalPrior::two_point(double epsilon, double mu) {
  SignalPrior pr;
  pr.epsilon = epsilon;
  pr.kind = Nonzero::kSymmetricTwoPoint;
  pr.mu = mu;
  pr.check();
  return pr;
}

SignalPrior SignalPrior::gaussian(double epsilon) {
  SignalPrior pr;
  pr.epsilon = epsilon;
  pr.kind = Nonzero::kStandardGaussian;
  pr.check();
  return pr;
}

SignalPrior SignalPrior::with_atoms(double epsilon,
                                    std::vector<std::pair<double, double>> atoms) {
  SignalPrior pr;
  pr.epsilon = epsilon;
  pr.kind = Nonzero::kAtoms;
  pr.atoms = std::move(atoms);
  pr.check();
  return pr;
}

void SignalPrior::check() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("prior: epsilon must be in [0, 1]");
  if (kind == Nonzero::kPointMass || kind == Nonzero::kSymmetricTwoPoint) {
    if (mu == 0.0 || !std::isfinite(mu))
      throw std::invalid_argument("prior: nonzero magnitude must be finite and nonzero");
  }
  if (kind == Nonzero::kAtoms) {
    if (atoms.empty() && epsilon > 0.0)
      throw std::invalid_argument("prior: empty atom list");
    double total = 0.0;
    for (const auto& [v, w] : atoms) {
      if (v == 0.0) throw std::invalid_argument("prior: atom at zero in the nonzero part");
      if (!(w >= 0.0)) throw std::invalid_argument("prior: negative atom weight");
      total += w;
    }
    if (!atoms.empty() && std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("prior: atom weights must sum to 1");
  }
}

std::vector<std::pair<double, double>> SignalPrior::nonzero_atoms(int gh_order) const {
  switch (kind) {
    case Nonzero::kPointMass:
      return {{mu, 1.0}};
    case Nonzero::kSymmetricTwoPoint:
      return {{mu, 0.5}, {-mu, 0.5}};
    case Nonzero::kAtoms:
      return atoms;
    case Nonzero::kStandardGaussian: {
      std::vector<double> x, w;
      gauss_hermite(gh_order, x, w);
      std::vector<std::pair<double, double>> out;
      out.reserve(x.size());
      for (size_t i = 0; i < x.size(); ++i) out.emplace_back(x[i], w[i]);
      return out;
    }
  }
  throw std::logic_error("prior: unreachable");
}

double SignalPrior::second_moment() const {
  double eu2 = 0.0;
  switch (kind) {
    case Nonzero::kPointMass:
    case Nonzero::kSymmetricTwoPoint:
      eu2 = mu * mu;
      break;
    case Nonzero::kStandardGaussian:
      eu2 = 1.0;
      break;
    case Nonzero::kAtoms:
      for (const auto& [v, w] : atoms) eu2 += w * v * v;
      break;
  }
  return epsilon * eu2;
}

// Nodes via Newton on the three-term recurrences; cached per order.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  static std::mutex mu_;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache.find(n);
    if (it != cache.end()) {
      nodes = it->second.first;
      weights = it->second.second;
      return;
    }
  }
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  std::lock_guard<std::mutex> lock(mu_);
  cache[n] = {nodes, weights};
}

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  static std::mutex mu_;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache.find(n);
    if (it != cache.end()) {
      nodes = it->second.first;
      weights = it->second.second;
      return;
    }
  }
  // Physicists' rule for int f(t) e^{-t^2} dt, then rescale t = z/sqrt(2),
  // w -> w/sqrt(pi) so that sum w_i f(x_i) approximates E f(Z), Z ~ N(0,1).
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  double x = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      x -= 1.14 * std::pow(n, 0.426) / x;
    else if (i == 2)
      x = 1.86 * x - 0.86 * nodes[0];
    else if (i == 3)
      x = 1.91 * x - 0.91 * nodes[1];
    else
      x = 2.0 * x - nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p0 = pim4, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = x * std::sqrt(2.0 / (j + 1.0)) * p1 - std::sqrt(double(j) / (j + 1.0)) * p2;
      }
      pp = std::sqrt(2.0 * n) * p1;
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    // Store physicists' nodes descending in the front half.
    nodes[i] = x;
    nodes[n - 1 - i] = -x;
    weights[i] = weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  const double sqrt2 = std::sqrt(2.0);
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    nodes[i] *= sqrt2;
    weights[i] *= inv_sqrt_pi;
  }
  std::lock_guard<std::mutex> lock(mu_);
  cache[n] = {nodes, weights};
}

}  // namespace lpamp
