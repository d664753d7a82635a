#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosil/conic.hpp"
#include "sosil/polynomial.hpp"
#include "sosil/sos.hpp"
#include "sosil/system.hpp"

namespace sosil {

/// A polynomial Lyapunov function V for a fixed closed loop ẋ = (A + BK) Z,
/// searched over all monomials of degree 2..degree with
///   V − ε₁‖x‖² SOS  and  −∇V·f − ε₂‖x‖² SOS.
/// Unlike the learner's certificate, V is not tied to Z, so it can prove
/// stability of controllers the learner's class cannot certify.
struct PolynomialLyapunov {
  Polynomial V;
  bool found = false;
  double residual = 0.0;
  SolveStatus status = SolveStatus::MaxIters;
};

inline std::vector<Polynomial> closed_loop_field(const SystemDef& sys, const PolyMatrix& K) {
  const PolyMatrix f = (sys.A + sys.B * K) * sys.Zcol;
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < sys.n; ++i) out.push_back(f.entry(i, 0));
  return out;
}

inline PolynomialLyapunov find_polynomial_lyapunov(const SystemDef& sys, const PolyMatrix& K, unsigned degree,
                                                   double eps1 = kDefaultEps1, double eps2 = kDefaultEps2) {
  if (degree < 2 || degree % 2 != 0) throw std::invalid_argument("find_polynomial_lyapunov: degree must be even, >= 2");
  const std::size_t n = sys.n;
  const std::vector<Polynomial> f = closed_loop_field(sys, K);
  std::vector<Exponent> monos;
  const MonomialBasis all = basis(n, degree);
  for (const auto& e : all.entries())
    if (e.degree() >= 2) monos.push_back(e);

  Polynomial norm2(n);
  for (std::size_t i = 0; i < n; ++i) norm2 = norm2 + Polynomial::variable(n, i) * Polynomial::variable(n, i);

  // Block 0 holds the coefficients of V as a 1 x L row.
  AffineMatrixExpr pos{PolyMatrix::from_entries({{-eps1 * norm2}}, n), {}};
  AffineMatrixExpr dec{PolyMatrix::from_entries({{-eps2 * norm2}}, n), {}};
  for (std::size_t c = 0; c < monos.size(); ++c) {
    const Polynomial mono = Polynomial::monomial(monos[c]);
    Polynomial rate(n);
    for (std::size_t i = 0; i < n; ++i) rate = rate + mono.derivative(i) * f[i];
    const Term h{0, 0, c, 1.0};
    pos.linear.push_back({h, PolyMatrix::from_entries({{mono}}, n)});
    dec.linear.push_back({h, PolyMatrix::from_entries({{-1.0 * rate}}, n)});
  }

  const GramBasis g1 = gram_basis_for(pos, 1), g2 = gram_basis_for(dec, 1);
  ConeProblem prob;
  prob.blocks = {{"V", BlockKind::Free, 1, monos.size()},
                 {"Q1", BlockKind::PSD, g1.size(), g1.size()},
                 {"Q2", BlockKind::PSD, g2.size(), g2.size()}};
  prob.equalities = compile_gram_identity(pos, g1, 1);
  const auto rows2 = compile_gram_identity(dec, g2, 2);
  prob.equalities.insert(prob.equalities.end(), rows2.begin(), rows2.end());

  SolverConfig cfg;
  cfg.tol_primal = cfg.tol_dual = 1e-9;
  cfg.max_iters = 50000;
  const ConeSolution sol = solve(prob, cfg);

  PolynomialLyapunov out;
  out.status = sol.status;
  out.residual = max_abs_residual(prob.equalities, sol.values);
  out.V = Polynomial(n);
  for (std::size_t c = 0; c < monos.size(); ++c)
    out.V = out.V + sol.values[0](0, static_cast<Eigen::Index>(c)) * Polynomial::monomial(monos[c]);
  out.found = sol.status == SolveStatus::Solved && out.residual <= 1e-6;
  return out;
}

/// Throws unless the expert of `e` admits a polynomial Lyapunov function of
/// the experiment's stated degree.
template <class Experiment>
PolynomialLyapunov check_expert(const Experiment& e) {
  PolynomialLyapunov r = find_polynomial_lyapunov(e.sys, e.expert, e.expert_lyapunov_degree);
  if (!r.found)
    throw std::runtime_error("expert of " + e.name + " has no degree-" + std::to_string(e.expert_lyapunov_degree) +
                             " Lyapunov certificate");
  return r;
}

}  // namespace sosil
