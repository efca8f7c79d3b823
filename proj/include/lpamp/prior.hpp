#pragma once

#include <vector>

namespace lpamp {

// Sparse signal prior (1 - epsilon)*delta_0 + epsilon*G where G is the
// distribution of the nonzero part.
struct SignalPrior {
  enum class Nonzero { kPointMass, kSymmetricTwoPoint, kStandardGaussian, kAtoms };

  double epsilon = 0.0;
  Nonzero kind = Nonzero::kPointMass;
  double mu = 1.0;                          // point-mass / two-point magnitude
  std::vector<std::pair<double, double>> atoms;  // (value, weight) for kAtoms

  static SignalPrior point_mass(double epsilon, double mu);
  static SignalPrior two_point(double epsilon, double mu);
  static SignalPrior gaussian(double epsilon);
  static SignalPrior with_atoms(double epsilon,
                                std::vector<std::pair<double, double>> atoms);

  // Atomic representation of G; a Gaussian nonzero part is discretized with
  // Gauss-Hermite quadrature of the given order. Weights sum to 1.
  std::vector<std::pair<double, double>> nonzero_atoms(int gh_order) const;

  double second_moment() const;  // E X^2 = epsilon * E U^2
  void check() const;            // throws on invalid configuration
};

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Gauss-Hermite rule for E f(Z), Z ~ N(0,1): sum w_i f(x_i) with sum w_i = 1.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace lpamp
