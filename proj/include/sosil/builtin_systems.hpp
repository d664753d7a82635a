#pragma once

#include <string>

#include <Eigen/Dense>

#include "sosil/polynomial.hpp"
#include "sosil/system.hpp"

namespace sosil {

/// A plant, an expert controller K(x) (so that u = K(x) Z(x)), the learner's
/// default degrees, and the degree of a polynomial Lyapunov function that
/// proves the expert stabilizing.
struct BuiltinExperiment {
  std::string name;
  SystemDef sys;
  PolyMatrix expert;
  unsigned d_K = 0, d_P = 0, d_F = 0;
  unsigned expert_lyapunov_degree = 2;
};

/// Two-state nonlinear plant with a linear expert u = −2x₁ − 10x₂.
inline BuiltinExperiment nonlinear_system_experiment() {
  const std::size_t n = 2;
  const Polynomial one = Polynomial::constant(n, 1.0);
  const Polynomial x1 = Polynomial::variable(n, 0), x2 = Polynomial::variable(n, 1);
  const Polynomial a11 = -1.0 * one + x1 - 1.5 * x1 * x1 - 0.75 * x2 * x2;
  const Polynomial a12 = 0.25 * one - x1 * x1 - 0.5 * x2 * x2;
  const PolyMatrix A = PolyMatrix::from_entries({{a11, a12}, {Polynomial(n), Polynomial(n)}}, n);
  const PolyMatrix B = PolyMatrix::from_entries({{Polynomial(n)}, {one}}, n);
  Eigen::MatrixXd K(1, 2);
  K << -2.0, -10.0;
  return {"nonlinear_system", make_system(A, B, {x1, x2}), PolyMatrix::constant(K, n), 0, 0, 0, 2};
}

/// Marginally stable linear plant (harmonic oscillator) with a cubic expert
/// u = (−0.1 − 0.1x₁²)x₁ + (−0.1 − 0.1x₂²)x₂. The learner is constant K with
/// quadratic F, so a quadratic V is the only certificate available to it; the
/// expert needs a quartic one.
inline BuiltinExperiment nonlinear_control_experiment() {
  const std::size_t n = 2;
  const Polynomial one = Polynomial::constant(n, 1.0);
  const Polynomial x1 = Polynomial::variable(n, 0), x2 = Polynomial::variable(n, 1);
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, -1, 0;
  B << 0, 1;
  const PolyMatrix K =
      PolyMatrix::from_entries({{-0.1 * one - 0.1 * x1 * x1, -0.1 * one - 0.1 * x2 * x2}}, n);
  return {"nonlinear_control", make_system(PolyMatrix::constant(A, n), PolyMatrix::constant(B, n), {x1, x2}), K, 0, 0, 2, 4};
}

}  // namespace sosil
