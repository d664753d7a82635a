#pragma once

// Compilation of the two matrix sum-of-squares conditions
//
//   vᵀ[P(x̃) − ε₁I]v          = [z₁(x)⊗v]ᵀ Q₁ [z₁(x)⊗v],   Q₁ ⪰ 0
//   vᵀ[S(x; P, F) + ε₂I]v    = [z₂(x)⊗v]ᵀ Q₂ [z₂(x)⊗v],   Q₂ ⪯ 0
//
// into scalar linear equalities, one per monomial x^β·v_a·v_b, over the
// coefficient matrices {P_i}, {F_i} and the Gram matrices. S is the stability
// matrix of system.hpp. Everything stays on exponent bookkeeping: v is never
// sampled while compiling.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sosil/linear_model.hpp"
#include "sosil/polynomial.hpp"
#include "sosil/rng.hpp"
#include "sosil/system.hpp"

namespace sosil {

inline constexpr double kDefaultEps1 = 1e-3;
inline constexpr double kDefaultEps2 = 1e-4;

/// Monomial vector z(x) and the lifted basis z(x) ⊗ v, v ∈ ℝ^p.
/// Lifted entry k = s·p + a stands for z_s(x)·v_a.
struct GramBasis {
  MonomialBasis z;
  std::size_t block_dim = 0;

  std::size_t size() const { return z.size() * block_dim; }

  std::pair<Exponent, std::size_t> kron_entry(std::size_t k) const { return {z[k / block_dim], k % block_dim}; }

  std::vector<std::pair<Exponent, std::size_t>> kron_entries() const {
    std::vector<std::pair<Exponent, std::size_t>> out;
    for (std::size_t k = 0; k < size(); ++k) out.push_back(kron_entry(k));
    return out;
  }

  Eigen::VectorXd eval(std::span<const double> x, const Eigen::VectorXd& v) const {
    const Eigen::VectorXd zx = z.eval(x);
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    for (Eigen::Index s = 0; s < zx.size(); ++s)
      out.segment(s * v.size(), v.size()) = zx[s] * v;
    return out;
  }
};

/// z = all monomials in `variables` of degree <= ⌈target_degree / 2⌉.
inline GramBasis choose_gram_basis(unsigned target_degree, std::size_t nvars, std::vector<std::size_t> variables,
                                   std::size_t p) {
  return GramBasis{MonomialBasis(nvars, std::move(variables), (target_degree + 1) / 2), p};
}

/// Matrix polynomial affine in scalar decision variables:
///   constant + Σ_h θ_h · linear[h].second.
struct AffineMatrixExpr {
  PolyMatrix constant;
  std::vector<std::pair<Term, PolyMatrix>> linear;  // Term weight is unused
};

/// Gram basis sized from the monomials actually present in `expr`.
inline GramBasis gram_basis_for(const AffineMatrixExpr& expr, std::size_t p) {
  const std::size_t n = expr.constant.nvars();
  std::vector<bool> present(n, false);
  unsigned degree = 0;
  auto scan = [&](const PolyMatrix& m) {
    for (const auto& [e, c] : m.terms()) {
      degree = std::max(degree, e.degree());
      for (std::size_t i = 0; i < n; ++i)
        if (e[i] != 0) present[i] = true;
    }
  };
  scan(expr.constant);
  for (const auto& [h, m] : expr.linear) scan(m);
  std::vector<std::size_t> vars;
  for (std::size_t i = 0; i < n; ++i)
    if (present[i]) vars.push_back(i);
  return choose_gram_basis(degree, n, std::move(vars), p);
}

namespace detail {

struct RowKey {
  Exponent beta;
  std::size_t a = 0, b = 0;

  friend bool operator<(const RowKey& l, const RowKey& r) {
    if (l.beta < r.beta) return true;
    if (r.beta < l.beta) return false;
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  }
};

inline std::string describe(const RowKey& k) {
  std::string s = to_string(Polynomial::monomial(k.beta));
  return s + " * v" + std::to_string(k.a + 1) + " * v" + std::to_string(k.b + 1);
}

}  // namespace detail

/// Equalities matching vᵀ·expr·v against [z⊗v]ᵀ Q [z⊗v] coefficient by
/// coefficient, where Q is block `q_block`. Throws when a monomial of the
/// left side has no counterpart in the Gram form.
inline std::vector<LinearEquality> compile_gram_identity(const AffineMatrixExpr& expr, const GramBasis& gb,
                                                         std::size_t q_block) {
  const std::size_t p = gb.block_dim;
  if (expr.constant.rows() != p || expr.constant.cols() != p)
    throw std::invalid_argument("compile_gram_identity: expression must be p x p");
  std::map<detail::RowKey, LinearEquality> rows;
  std::set<detail::RowKey> source, target;

  auto fold = [&](const PolyMatrix& S, auto&& sink) {
    for (const auto& [beta, mat] : S.terms())
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a; b < p; ++b) {
          const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
          const double w = a == b ? mat(ia, ia) : mat(ia, ib) + mat(ib, ia);
          if (w == 0.0) continue;
          detail::RowKey key{beta, a, b};
          sink(rows[key], w);
          source.insert(key);
        }
  };

  for (const auto& [h, S] : expr.linear)
    fold(S, [&](LinearEquality& eq, double w) { eq.lhs.push_back(Term{h.block, h.row, h.col, w}); });
  fold(expr.constant, [](LinearEquality& eq, double w) { eq.constant += w; });

  const std::size_t K = gb.size();
  for (std::size_t I = 0; I < K; ++I)
    for (std::size_t J = I; J < K; ++J) {
      const auto [zs, a] = gb.kron_entry(I);
      const auto [zt, b] = gb.kron_entry(J);
      detail::RowKey key{zs * zt, std::min(a, b), std::max(a, b)};
      rows[key].rhs.push_back(Term{q_block, I, J, I == J ? 1.0 : 2.0});
      target.insert(key);
    }

  for (const auto& key : source)
    if (!target.count(key))
      throw std::runtime_error("Gram basis too small: monomial " + detail::describe(key) +
                               " has no Gram representation");

  std::vector<LinearEquality> out;
  out.reserve(rows.size());
  for (auto& [key, eq] : rows) {
    eq.lhs = merge_terms(eq.lhs);
    eq.rhs = merge_terms(eq.rhs);
    out.push_back(std::move(eq));
  }
  return out;
}

namespace detail {

inline PolyMatrix symmetric_unit(std::size_t p, std::size_t a, std::size_t b, const Exponent& mono) {
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  E(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
  E(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0;
  PolyMatrix out(p, p, mono.size());
  out.add_term(mono, E);
  return out;
}

inline PolyMatrix unit(std::size_t rows, std::size_t cols, std::size_t r, std::size_t c, const Exponent& mono) {
  PolyMatrix out(rows, cols, mono.size());
  out.add_entry(mono, r, c, 1.0);
  return out;
}

}  // namespace detail

/// vᵀ[P(x̃) − ε₁I]v as an affine expression in the P blocks. P block i
/// (decision block index `first_p_block + i`) multiplies p_basis[i].
inline AffineMatrixExpr p_constraint_expression(const MonomialBasis& p_basis, std::size_t p, double eps1,
                                                std::size_t first_p_block = 0) {
  const std::size_t n = p_basis.nvars();
  AffineMatrixExpr expr;
  expr.constant = PolyMatrix::identity(p, n) * (-eps1);
  for (std::size_t i = 0; i < p_basis.size(); ++i)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b)
        expr.linear.emplace_back(Term{first_p_block + i, a, b, 1.0}, detail::symmetric_unit(p, a, b, p_basis[i]));
  return expr;
}

/// vᵀ[S(x; P, F) + ε₂I]v as an affine expression in the P and F blocks.
inline AffineMatrixExpr stability_constraint_expression(const SystemDef& sys, const MonomialBasis& p_basis,
                                                        const MonomialBasis& f_basis, double eps2,
                                                        std::size_t first_p_block, std::size_t first_f_block) {
  const std::size_t n = sys.n, p = sys.p, m = sys.m;
  const PolyMatrix zeroP(p, p, n), zeroF(m, p, n);
  AffineMatrixExpr expr;
  expr.constant = PolyMatrix::identity(p, n) * eps2;
  for (std::size_t i = 0; i < p_basis.size(); ++i)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b)
        expr.linear.emplace_back(Term{first_p_block + i, a, b, 1.0},
                                 stability_expression(sys, detail::symmetric_unit(p, a, b, p_basis[i]), zeroF));
  for (std::size_t k = 0; k < f_basis.size(); ++k)
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < p; ++c)
        expr.linear.emplace_back(Term{first_f_block + k, r, c, 1.0},
                                 stability_expression(sys, zeroP, detail::unit(m, p, r, c, f_basis[k])));
  return expr;
}

/// Equalities for vᵀ[P − ε₁I]v = [z₁⊗v]ᵀQ₁[z₁⊗v] with P blocks numbered from 0.
inline std::vector<LinearEquality> compile_P_constraint(const MonomialBasis& p_basis, std::size_t p, double eps1,
                                                        const GramBasis& gb, std::size_t q1_block) {
  if (!(eps1 > 0.0)) throw std::invalid_argument("compile_P_constraint: eps1 must be positive");
  if (2 * gb.z.max_degree() < p_basis.max_degree())
    throw std::invalid_argument("compile_P_constraint: Gram basis degree too small for P");
  return compile_gram_identity(p_constraint_expression(p_basis, p, eps1), gb, q1_block);
}

inline std::vector<LinearEquality> compile_stability_constraint(const SystemDef& sys, const MonomialBasis& p_basis,
                                                                const MonomialBasis& f_basis, double eps2,
                                                                const GramBasis& gb, std::size_t q2_block) {
  if (!(eps2 > 0.0)) throw std::invalid_argument("compile_stability_constraint: eps2 must be positive");
  return compile_gram_identity(stability_constraint_expression(sys, p_basis, f_basis, eps2, 0, p_basis.size()), gb,
                               q2_block);
}

/// Compiled certificate conditions for one system and degree choice.
///
/// Block order: P_0 .. P_{|p_basis|-1} (symmetric p x p), F_0 .. F_{|f_basis|-1}
/// (m x p), Q₁ (PSD), Q₂ (NSD). The first `p_constraint_rows` equalities come
/// from the P condition, the rest from the stability condition.
struct GramConstraintSet {
  std::vector<Block> blocks;
  MonomialBasis p_basis, f_basis;
  GramBasis gram1, gram2;
  std::vector<LinearEquality> equalities;
  std::size_t p_constraint_rows = 0;
  double eps1 = kDefaultEps1, eps2 = kDefaultEps2;

  std::size_t p_block(std::size_t i) const { return i; }
  std::size_t f_block(std::size_t k) const { return p_basis.size() + k; }
  std::size_t q1_block() const { return p_basis.size() + f_basis.size(); }
  std::size_t q2_block() const { return q1_block() + 1; }
};

inline GramConstraintSet compile_certificate(const SystemDef& sys, unsigned d_P, unsigned d_F,
                                             double eps1 = kDefaultEps1, double eps2 = kDefaultEps2) {
  if (!(eps1 > 0.0) || !(eps2 > 0.0)) throw std::invalid_argument("compile_certificate: eps1, eps2 must be positive");
  GramConstraintSet g;
  g.eps1 = eps1;
  g.eps2 = eps2;
  g.p_basis = MonomialBasis(sys.n, sys.reduced_vars(), d_P);
  g.f_basis = basis(sys.n, d_F);
  for (std::size_t i = 0; i < g.p_basis.size(); ++i)
    g.blocks.push_back({"P" + std::to_string(i), BlockKind::Symmetric, sys.p, sys.p});
  for (std::size_t k = 0; k < g.f_basis.size(); ++k)
    g.blocks.push_back({"F" + std::to_string(k), BlockKind::Free, sys.m, sys.p});

  const AffineMatrixExpr pexpr = p_constraint_expression(g.p_basis, sys.p, eps1, 0);
  const AffineMatrixExpr sexpr =
      stability_constraint_expression(sys, g.p_basis, g.f_basis, eps2, 0, g.p_basis.size());
  g.gram1 = gram_basis_for(pexpr, sys.p);
  g.gram2 = gram_basis_for(sexpr, sys.p);
  g.blocks.push_back({"Q1", BlockKind::PSD, g.gram1.size(), g.gram1.size()});
  g.blocks.push_back({"Q2", BlockKind::NSD, g.gram2.size(), g.gram2.size()});

  g.equalities = compile_gram_identity(pexpr, g.gram1, g.q1_block());
  g.p_constraint_rows = g.equalities.size();
  auto rows2 = compile_gram_identity(sexpr, g.gram2, g.q2_block());
  g.equalities.insert(g.equalities.end(), rows2.begin(), rows2.end());
  return g;
}

/// P(x̃) = Σ values[P_i] · p_basis[i].
inline PolyMatrix assemble_P(const GramConstraintSet& g, const BlockValues& v) {
  std::vector<Eigen::MatrixXd> c;
  for (std::size_t i = 0; i < g.p_basis.size(); ++i) c.push_back(v.at(g.p_block(i)));
  return PolyMatrix::from_coefficients(g.p_basis, c);
}

inline PolyMatrix assemble_F(const GramConstraintSet& g, const BlockValues& v) {
  std::vector<Eigen::MatrixXd> c;
  for (std::size_t k = 0; k < g.f_basis.size(); ++k) c.push_back(v.at(g.f_block(k)));
  return PolyMatrix::from_coefficients(g.f_basis, c);
}

/// Largest discrepancy between the two sides of each Gram identity, divided by
/// ‖v‖², over `samples` random points (x, v) ∈ [−2, 2]^{n+p}. `magnitude`
/// holds the largest normalized left-hand side seen.
struct CompiledCheck {
  double max_residual = 0.0;
  double magnitude = 0.0;
};

inline CompiledCheck verify_compiled(const GramConstraintSet& g, const BlockValues& v, const SystemDef& sys,
                                     std::size_t samples, std::uint64_t seed = 7) {
  const PolyMatrix P = assemble_P(g, v), F = assemble_F(g, v);
  const Eigen::MatrixXd& Q1 = v.at(g.q1_block());
  const Eigen::MatrixXd& Q2 = v.at(g.q2_block());
  const auto p = static_cast<Eigen::Index>(sys.p);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
  SplitMix64 rng(seed);
  CompiledCheck out;
  Eigen::VectorXd x(static_cast<Eigen::Index>(sys.n)), vv(p);
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
    for (Eigen::Index i = 0; i < p; ++i) vv[i] = rng.uniform(-2.0, 2.0);
    const double vn = vv.squaredNorm();
    if (vn < 1e-12) continue;
    const auto xs = as_span(x);
    const double lhs1 = vv.dot((P.eval(xs) - g.eps1 * I) * vv);
    const Eigen::VectorXd k1 = g.gram1.eval(xs, vv);
    const double rhs1 = k1.dot(Q1 * k1);
    const double lhs2 = vv.dot((stability_matrix_at(sys, P, F, xs) + g.eps2 * I) * vv);
    const Eigen::VectorXd k2 = g.gram2.eval(xs, vv);
    const double rhs2 = k2.dot(Q2 * k2);
    out.max_residual = std::max({out.max_residual, std::abs(lhs1 - rhs1) / vn, std::abs(lhs2 - rhs2) / vn});
    out.magnitude = std::max({out.magnitude, std::abs(lhs1) / vn, std::abs(lhs2) / vn});
  }
  return out;
}

inline void write_standard_form(std::ostream& os, const GramConstraintSet& g) {
  write_blocks(os, g.blocks);
  for (const auto& eq : g.equalities) write_equality(os, g.blocks, eq);
}

inline std::string standard_form_string(const GramConstraintSet& g) {
  std::ostringstream os;
  write_standard_form(os, g);
  return os.str();
}

}  // namespace sosil
