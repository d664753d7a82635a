#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sosil/polynomial.hpp"

namespace sosil {

/// Known polynomial plant ẋ = A(x) Z(x) + B(x) u.
///
/// A is n x p, B is n x m, Z has p entries with Z(0) = 0. M is the p x n
/// Jacobian of Z, and `zero_rows` holds the indices of the rows of B that are
/// identically zero. Those indices double as the variables of the reduced
/// state x̃ on which a Lyapunov matrix P may depend.
struct SystemDef {
  std::size_t n = 0, m = 0, p = 0;
  PolyMatrix A, B, M;
  std::vector<Polynomial> Z;
  PolyMatrix Zcol;
  std::vector<std::size_t> zero_rows;

  const std::vector<std::size_t>& reduced_vars() const { return zero_rows; }

  Eigen::VectorXd eval_z(std::span<const double> x) const { return eval_vector(Z, x); }
};

inline SystemDef make_system(PolyMatrix A, PolyMatrix B, std::vector<Polynomial> Z) {
  if (Z.empty()) throw std::invalid_argument("make_system: Z must be nonempty");
  SystemDef s;
  s.n = A.nvars();
  s.p = Z.size();
  s.m = B.cols();
  if (A.rows() != s.n || A.cols() != s.p)
    throw std::invalid_argument("make_system: A must be n x p");
  if (B.rows() != s.n || B.nvars() != s.n) throw std::invalid_argument("make_system: B must be n x m");
  for (const auto& z : Z) {
    if (z.nvars() != s.n) throw std::invalid_argument("make_system: Z entries must be over n variables");
    if (z.coefficient(Exponent(s.n)) != 0.0) throw std::invalid_argument("make_system: Z(0) must be zero");
  }
  s.A = std::move(A);
  s.B = std::move(B);
  s.Z = std::move(Z);
  s.Zcol = column(s.Z);
  s.M = jacobian(s.Z);
  for (std::size_t r = 0; r < s.n; ++r) {
    bool zero = true;
    for (const auto& [e, mat] : s.B.terms())
      if (!mat.row(static_cast<Eigen::Index>(r)).isZero(0.0)) zero = false;
    if (zero) s.zero_rows.push_back(r);
  }
  return s;
}

/// Symbolic stability matrix
///   P Aᵀ Mᵀ + M A P + Fᵀ Bᵀ Mᵀ + M B F − Σ_{j∈J} ∂P/∂x_j · (A_j Z)
/// for a p x p Lyapunov matrix P(x̃) and an m x p factor F(x).
inline PolyMatrix stability_expression(const SystemDef& sys, const PolyMatrix& P, const PolyMatrix& F) {
  if (P.rows() != sys.p || P.cols() != sys.p) throw std::invalid_argument("stability_expression: P must be p x p");
  if (F.rows() != sys.m || F.cols() != sys.p) throw std::invalid_argument("stability_expression: F must be m x p");
  const PolyMatrix MA = sys.M * sys.A;
  const PolyMatrix MB = sys.M * sys.B;
  PolyMatrix S = MA * P;
  S += S.transpose();
  PolyMatrix BF = MB * F;
  S += BF;
  S += BF.transpose();
  for (std::size_t j : sys.zero_rows) {
    PolyMatrix dP = P.partial(j);
    if (dP.is_zero()) continue;
    const PolyMatrix xdot_j = sys.A.row(j) * sys.Zcol;  // 1 x 1
    S -= xdot_j.entry(0, 0) * dP;
  }
  return S;
}

/// Numeric evaluation of the stability matrix at x, computed from pointwise
/// values of A, B, M, Z, P, F and ∂P/∂x_j rather than from the symbolic
/// expansion.
inline Eigen::MatrixXd stability_matrix_at(const SystemDef& sys, const PolyMatrix& P, const PolyMatrix& F,
                                           std::span<const double> x) {
  const Eigen::MatrixXd A = sys.A.eval(x), B = sys.B.eval(x), M = sys.M.eval(x);
  const Eigen::MatrixXd Pv = P.eval(x), Fv = F.eval(x);
  const Eigen::VectorXd z = sys.eval_z(x);
  Eigen::MatrixXd S = Pv * A.transpose() * M.transpose() + M * A * Pv + Fv.transpose() * B.transpose() * M.transpose() +
                      M * B * Fv;
  for (std::size_t j : sys.zero_rows) {
    const double xdot_j = A.row(static_cast<Eigen::Index>(j)).dot(z);
    S -= xdot_j * P.partial(j).eval(x);
  }
  return S;
}

}  // namespace sosil
