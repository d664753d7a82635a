#pragma once

// Convex quadratic programs over free, symmetric and semidefinite matrix
// blocks with linear equality constraints:
//
//   minimize   ½ Σ_r (a_rᵀ y − t_r)² + cᵀ y
//   subject to A y = b,  PSD blocks ⪰ 0,  NSD blocks ⪯ 0
//
// solved by operator splitting on the copy constraint y = z with z in the cone:
// an equality-constrained quadratic step through a cached KKT factorization,
// a blockwise projection onto the cone, and a scaled dual update. Semidefinite
// blocks are vectorized with √2-scaled off-diagonals so the Euclidean metric on
// the internal vector is the Frobenius metric on the blocks; NSD blocks are
// negated so a single PSD projection serves both orientations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosil/linear_model.hpp"

namespace sosil {

struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
  int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `tol` times the Frobenius norm of the input.
inline SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& S, double tol = 1e-12, int max_sweeps = 100) {
  if (S.rows() != S.cols()) throw std::invalid_argument("jacobi_eigen: matrix must be square");
  const Eigen::Index n = S.rows();
  Eigen::MatrixXd A = 0.5 * (S + S.transpose());
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
  const double scale = A.norm();
  SymmetricEigen out;
  for (int sweep = 0;; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) off += A(i, j) * A(i, j);
    if (std::sqrt(off) <= tol * scale || scale == 0.0) {
      out.sweeps = sweep;
      break;
    }
    if (sweep >= max_sweeps) throw std::runtime_error("jacobi_eigen: no convergence within sweep cap");
    for (Eigen::Index p = 0; p < n - 1; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = A(p, k) = c * akp - s * akq;
          A(k, q) = A(q, k) = s * akp + c * akq;
        }
        A(p, p) -= t * apq;
        A(q, q) += t * apq;
        A(p, q) = A(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
  }
  out.values = A.diagonal();
  out.vectors = std::move(V);
  return out;
}

/// Nearest positive semidefinite matrix in Frobenius norm. Rebuilt from the
/// smaller eigen-side so inputs that are already PSD come back unchanged up
/// to rounding.
inline Eigen::MatrixXd psd_project(const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd Ss = 0.5 * (S + S.transpose());
  const SymmetricEigen eig = jacobi_eigen(Ss);
  const Eigen::Index neg = (eig.values.array() < 0.0).count();
  if (neg == 0) return Ss;
  Eigen::MatrixXd R;
  if (2 * neg <= eig.values.size()) {
    const Eigen::VectorXd lo = eig.values.cwiseMin(0.0);
    R = Ss - eig.vectors * lo.asDiagonal() * eig.vectors.transpose();
  } else {
    const Eigen::VectorXd hi = eig.values.cwiseMax(0.0);
    R = eig.vectors * hi.asDiagonal() * eig.vectors.transpose();
  }
  return 0.5 * (R + R.transpose());
}

struct SolverConfig {
  double tol_primal = 1e-7;
  double tol_dual = 1e-7;
  int max_iters = 20000;
  double over_relaxation = 1.6;  // in [1, 2)
  double penalty = 1.0;
  bool adapt_penalty = true;
  int adapt_interval = 25;
  double rank_tol = 1e-10;
};

enum class SolveStatus { Solved, MaxIters, InfeasibleGuess };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "solved";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::InfeasibleGuess: return "infeasible_guess";
  }
  return "?";
}

/// ½ (Σ terms − target)².
struct ObjectiveRow {
  std::vector<Term> terms;
  double target = 0.0;
};

struct ConeProblem {
  std::vector<Block> blocks;
  std::vector<LinearEquality> equalities;
  std::vector<ObjectiveRow> objective;
  std::vector<Term> linear;
};

/// primal_residual is the larger of ‖y − z‖∞ and the equality violation at the
/// returned point; dual_residual is σ‖Δz‖∞ relative to 1 + the objective
/// gradient scale.
struct ConeSolution {
  BlockValues values;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIters;
};

inline double objective_value(const ConeProblem& prob, const BlockValues& v) {
  double f = 0.0;
  for (const auto& row : prob.objective) {
    double r = -row.target;
    for (const auto& t : row.terms) r += term_value(t, v);
    f += 0.5 * r * r;
  }
  for (const auto& t : prob.linear) f += term_value(t, v);
  return f;
}

namespace detail {

class VarMap {
public:
  explicit VarMap(const std::vector<Block>& blocks) : blocks_(blocks) {
    for (const auto& b : blocks) {
      if (b.rows == 0 || b.cols == 0) throw std::invalid_argument("ConeProblem: empty block " + b.name);
      if (is_symmetric_kind(b.kind) && b.rows != b.cols)
        throw std::invalid_argument("ConeProblem: symmetric block must be square: " + b.name);
      offsets_.push_back(size_);
      size_ += b.variable_count();
    }
  }

  std::size_t size() const { return size_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t offset(std::size_t block) const { return offsets_[block]; }

  std::size_t index(std::size_t block, std::size_t r, std::size_t c) const {
    const Block& b = blocks_.at(block);
    if (r >= b.rows || c >= b.cols) throw std::invalid_argument("ConeProblem: reference outside block " + b.name);
    if (!is_symmetric_kind(b.kind)) return offsets_[block] + r * b.cols + c;
    if (r > c) std::swap(r, c);
    return offsets_[block] + c * (c + 1) / 2 + r;
  }

  // internal = scale · entry
  double scale(std::size_t block, std::size_t r, std::size_t c) const {
    const Block& b = blocks_.at(block);
    double s = 1.0;
    if ((b.kind == BlockKind::PSD || b.kind == BlockKind::NSD) && r != c) s = std::numbers::sqrt2;
    if (b.kind == BlockKind::NSD) s = -s;
    return s;
  }

  bool has_cone() const {
    for (const auto& b : blocks_)
      if (b.kind == BlockKind::PSD || b.kind == BlockKind::NSD) return true;
    return false;
  }

  void project(Eigen::VectorXd& y) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      if (b.kind != BlockKind::PSD && b.kind != BlockKind::NSD) continue;
      const auto d = static_cast<Eigen::Index>(b.rows);
      Eigen::MatrixXd M(d, d);
      for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = 0; r <= c; ++r) {
          const double off = r == c ? 1.0 : std::numbers::sqrt2;
          M(r, c) = M(c, r) = y[static_cast<Eigen::Index>(offsets_[k]) + c * (c + 1) / 2 + r] / off;
        }
      const Eigen::MatrixXd P = psd_project(M);
      for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = 0; r <= c; ++r) {
          const double off = r == c ? 1.0 : std::numbers::sqrt2;
          y[static_cast<Eigen::Index>(offsets_[k]) + c * (c + 1) / 2 + r] = P(r, c) * off;
        }
    }
  }

  // Which internal entries belong to cone blocks.
  std::vector<bool> cone_mask() const {
    std::vector<bool> mask(size_, false);
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      if (blocks_[k].kind == BlockKind::PSD || blocks_[k].kind == BlockKind::NSD)
        for (std::size_t i = 0; i < blocks_[k].variable_count(); ++i) mask[offsets_[k] + i] = true;
    return mask;
  }

  Eigen::VectorXd pack(const BlockValues& v) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size_));
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      for (std::size_t r = 0; r < b.rows; ++r)
        for (std::size_t c = is_symmetric_kind(b.kind) ? r : 0; c < b.cols; ++c)
          y[static_cast<Eigen::Index>(index(k, r, c))] =
              scale(k, r, c) * v.at(k)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    return y;
  }

  BlockValues unpack(const Eigen::VectorXd& y) const {
    BlockValues v = zero_values(blocks_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& b = blocks_[k];
      for (std::size_t r = 0; r < b.rows; ++r)
        for (std::size_t c = is_symmetric_kind(b.kind) ? r : 0; c < b.cols; ++c) {
          const double val = y[static_cast<Eigen::Index>(index(k, r, c))] / scale(k, r, c);
          v[k](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = val;
          if (is_symmetric_kind(b.kind)) v[k](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = val;
        }
    }
    return v;
  }

private:
  const std::vector<Block>& blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t size_ = 0;
};

// svec with √2 off the diagonal, column-major upper triangle.
inline Eigen::VectorXd svec(const Eigen::MatrixXd& M) {
  const Eigen::Index d = M.rows();
  Eigen::VectorXd s(d * (d + 1) / 2);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r <= c; ++r) s[c * (c + 1) / 2 + r] = r == c ? M(r, c) : std::numbers::sqrt2 * M(r, c);
  return s;
}

inline Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& s, Eigen::Index d) {
  Eigen::MatrixXd M(d, d);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r <= c; ++r)
      M(r, c) = M(c, r) = r == c ? s[c * (c + 1) / 2 + r] : s[c * (c + 1) / 2 + r] / std::numbers::sqrt2;
  return M;
}

// Linear map from a reduced parameter vector into the internal variables:
// identity on non-cone entries, and for each cone block the face U W Uᵀ
// spanned by its numerically positive eigenvectors at w.
inline Eigen::MatrixXd face_basis(const VarMap& vm, const Eigen::VectorXd& w) {
  const std::vector<bool> mask = vm.cone_mask();
  Eigen::Index total = 0;
  for (bool c : mask)
    if (!c) ++total;
  std::vector<std::pair<std::size_t, Eigen::MatrixXd>> faces;
  for (std::size_t k = 0; k < vm.blocks().size(); ++k) {
    const Block& b = vm.blocks()[k];
    if (b.kind != BlockKind::PSD && b.kind != BlockKind::NSD) continue;
    const auto d = static_cast<Eigen::Index>(b.rows);
    const SymmetricEigen e =
        jacobi_eigen(smat(w.segment(static_cast<Eigen::Index>(vm.offset(k)), d * (d + 1) / 2), d));
    const double top = std::max(e.values.maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < d; ++i)
      if (e.values[i] > 1e-10 * top) keep.push_back(i);
    Eigen::MatrixXd U(d, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) U.col(static_cast<Eigen::Index>(j)) = e.vectors.col(keep[j]);
    total += U.cols() * (U.cols() + 1) / 2;
    faces.emplace_back(k, std::move(U));
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(w.size(), total);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!mask[static_cast<std::size_t>(i)]) G(i, col++) = 1.0;
  for (const auto& [k, U] : faces) {
    const Eigen::Index r = U.cols(), d = U.rows();
    for (Eigen::Index j = 0; j < r * (r + 1) / 2; ++j, ++col) {
      Eigen::VectorXd unit = Eigen::VectorXd::Zero(r * (r + 1) / 2);
      unit[j] = 1.0;
      G.block(static_cast<Eigen::Index>(vm.offset(k)), col, d * (d + 1) / 2, 1) =
          svec(U * smat(unit, r) * U.transpose());
    }
  }
  return G;
}

inline void add_terms(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, const VarMap& vm, const std::vector<Term>& terms,
                      double sign) {
  for (const auto& t : terms)
    row[static_cast<Eigen::Index>(vm.index(t.block, t.row, t.col))] += sign * t.weight / vm.scale(t.block, t.row, t.col);
}


}  // namespace detail

namespace detail {

inline ConeSolution solve_direct(const ConeProblem& prob, const SolverConfig& cfg, const BlockValues* warm_start) {
  if (prob.blocks.empty()) throw std::invalid_argument("solve: problem has no blocks");
  if (!(cfg.tol_primal > 0.0) || !(cfg.tol_dual > 0.0)) throw std::invalid_argument("solve: tolerances must be positive");
  if (!(cfg.penalty > 0.0)) throw std::invalid_argument("solve: penalty must be positive");
  const detail::VarMap vm(prob.blocks);
  const auto nv = static_cast<Eigen::Index>(vm.size());
  const auto m = static_cast<Eigen::Index>(prob.equalities.size());

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, nv);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& eq = prob.equalities[static_cast<std::size_t>(i)];
    detail::add_terms(A.row(i), vm, eq.lhs, 1.0);
    detail::add_terms(A.row(i), vm, eq.rhs, -1.0);
    b[i] = -eq.constant;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nv);
  double f0 = 0.0;
  for (const auto& row : prob.objective) {
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(nv);
    detail::add_terms(a, vm, row.terms, 1.0);
    H.noalias() += a.transpose() * a;
    q -= row.target * a.transpose();
    f0 += 0.5 * row.target * row.target;
  }
  {
    Eigen::RowVectorXd lin = Eigen::RowVectorXd::Zero(nv);
    detail::add_terms(lin, vm, prob.linear, 1.0);
    q += lin.transpose();
  }

  ConeSolution sol;
  auto finish = [&](const Eigen::VectorXd& w) {
    sol.values = vm.unpack(w);
    sol.objective = 0.5 * w.dot(H * w) + q.dot(w) + f0;
  };

  // Drop linearly dependent equality rows; inconsistent systems end here.
  Eigen::MatrixXd Ar = A;
  Eigen::VectorXd br = b;
  if (m > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
    qr.setThreshold(cfg.rank_tol);
    const Eigen::Index rank = qr.rank();
    std::vector<Eigen::Index> keep(qr.colsPermutation().indices().data(),
                                   qr.colsPermutation().indices().data() + rank);
    std::sort(keep.begin(), keep.end());
    Ar.resize(rank, nv);
    br.resize(rank);
    for (Eigen::Index i = 0; i < rank; ++i) {
      Ar.row(i) = A.row(keep[static_cast<std::size_t>(i)]);
      br[i] = b[keep[static_cast<std::size_t>(i)]];
    }
    if (rank < m) {
      const Eigen::VectorXd y0 = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(b);
      const double inconsistency = (A * y0 - b).lpNorm<Eigen::Infinity>();
      if (inconsistency > 1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>())) {
        sol.status = SolveStatus::InfeasibleGuess;
        sol.primal_residual = inconsistency;
        finish(y0);
        return sol;
      }
    }
  }
  const Eigen::Index r = Ar.rows();

  auto kkt_matrix = [&](double diag) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + r, nv + r);
    K.topLeftCorner(nv, nv) = H;
    K.topLeftCorner(nv, nv).diagonal().array() += diag;
    K.topRightCorner(nv, r) = Ar.transpose();
    K.bottomLeftCorner(r, nv) = Ar;
    return K;
  };

  // Without cone blocks the KKT system of the quadratic itself is the answer.
  if (!vm.has_cone()) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt_matrix(0.0));
    if (lu.isInvertible()) {
      Eigen::VectorXd rhs(nv + r);
      rhs << -q, br;
      const Eigen::VectorXd y = lu.solve(rhs).head(nv);
      finish(y);
      sol.primal_residual = (A * y - b).lpNorm<Eigen::Infinity>();
      sol.dual_residual = 0.0;
      sol.iterations = 1;
      sol.status = sol.primal_residual <= cfg.tol_primal ? SolveStatus::Solved : SolveStatus::InfeasibleGuess;
      return sol;
    }
  }

  const std::vector<bool> cone = vm.cone_mask();
  auto mixed = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    Eigen::VectorXd w = x;
    for (Eigen::Index i = 0; i < nv; ++i)
      if (cone[static_cast<std::size_t>(i)]) w[i] = z[i];
    return w;
  };

  double sigma = cfg.penalty;
  const double alpha = cfg.over_relaxation;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv), z, u = Eigen::VectorXd::Zero(nv);
  if (warm_start) x = vm.pack(*warm_start);
  z = x;
  vm.project(z);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt_matrix(sigma));
  Eigen::VectorXd rhs(nv + r);
  double rp = std::numeric_limits<double>::infinity(), rd = rp;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    rhs.head(nv) = sigma * (z - u) - q;
    rhs.tail(r) = br;
    x = lu.solve(rhs).head(nv);
    const Eigen::VectorXd xh = alpha * x + (1.0 - alpha) * z;
    Eigen::VectorXd z_new = xh + u;
    vm.project(z_new);
    u += xh - z_new;

    rp = (x - z_new).lpNorm<Eigen::Infinity>();
    const double grad_scale = 1.0 + std::max((H * x).lpNorm<Eigen::Infinity>(), q.lpNorm<Eigen::Infinity>());
    rd = sigma * (z_new - z).lpNorm<Eigen::Infinity>() / grad_scale;
    z = std::move(z_new);

    if (rp <= cfg.tol_primal && rd <= cfg.tol_dual) {
      const double eq_res = (A * mixed(x, z) - b).lpNorm<Eigen::Infinity>();
      if (eq_res <= cfg.tol_primal) {
        rp = std::max(rp, eq_res);
        ++it;
        sol.status = SolveStatus::Solved;
        break;
      }
    }

    if (cfg.adapt_penalty && (it + 1) % cfg.adapt_interval == 0) {
      const double rp_n = rp / (1.0 + std::max(x.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>()));
      double next = sigma;
      if (rp_n > 10.0 * rd && sigma < 1e8)
        next = 2.0 * sigma;
      else if (rd > 10.0 * rp_n && sigma > 1e-6)
        next = 0.5 * sigma;
      if (next != sigma) {
        u *= sigma / next;
        sigma = next;
        lu.compute(kkt_matrix(sigma));
      }
    }
  }
  Eigen::VectorXd w = mixed(x, z);
  // Alternate least-norm moves that cancel the equality residual, with cone
  // blocks held on the face of the current iterate, and re-projection; each
  // round is kept only while it helps.
  if (r > 0) {
    Eigen::VectorXd cand = w;
    double best = (A * w - b).lpNorm<Eigen::Infinity>();
    for (int round = 0; round < 20 && best > 0.0; ++round) {
      const Eigen::MatrixXd G = detail::face_basis(vm, cand);
      if (G.cols() == 0) break;
      cand -= G * Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(Ar * G).solve(Ar * cand - br);
      vm.project(cand);
      const double res = (A * cand - b).lpNorm<Eigen::Infinity>();
      if (!(res < best)) break;
      best = res;
      w = cand;
    }
  }
  finish(w);
  sol.iterations = it;
  sol.primal_residual = std::max(rp, (A * w - b).lpNorm<Eigen::Infinity>());
  sol.dual_residual = rd;
  if (sol.status != SolveStatus::Solved)
    sol.status = sol.primal_residual > 1e-3 ? SolveStatus::InfeasibleGuess : SolveStatus::MaxIters;
  return sol;
}

inline bool is_cone(BlockKind k) { return k == BlockKind::PSD || k == BlockKind::NSD; }

// Structural facial reduction. An equality whose surviving terms are all
// diagonal entries of semidefinite blocks, with one common sign in cone
// orientation and a zero constant, forces those diagonals to vanish, and with
// them their whole rows and columns. Repeated until nothing changes; the
// remaining problem lives on the smaller blocks.
struct FaceReduction {
  std::vector<std::vector<std::size_t>> kept;  // cone blocks only
  std::vector<std::ptrdiff_t> target;           // reduced block index or −1
  ConeProblem reduced;

  BlockValues restrict(const BlockValues& full, const std::vector<Block>& blocks) const {
    BlockValues out;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (target[k] < 0) continue;
      if (!is_cone(blocks[k].kind)) {
        out.push_back(full.at(k));
        continue;
      }
      const auto d = static_cast<Eigen::Index>(kept[k].size());
      Eigen::MatrixXd m(d, d);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
          m(i, j) = full.at(k)(static_cast<Eigen::Index>(kept[k][static_cast<std::size_t>(i)]),
                               static_cast<Eigen::Index>(kept[k][static_cast<std::size_t>(j)]));
      out.push_back(std::move(m));
    }
    return out;
  }

  BlockValues expand(const BlockValues& red, const std::vector<Block>& blocks) const {
    BlockValues out = zero_values(blocks);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (target[k] < 0) continue;
      const Eigen::MatrixXd& m = red[static_cast<std::size_t>(target[k])];
      if (!is_cone(blocks[k].kind)) {
        out[k] = m;
        continue;
      }
      for (std::size_t i = 0; i < kept[k].size(); ++i)
        for (std::size_t j = 0; j < kept[k].size(); ++j)
          out[k](static_cast<Eigen::Index>(kept[k][i]), static_cast<Eigen::Index>(kept[k][j])) =
              m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return out;
  }
};

inline FaceReduction reduce_faces(const ConeProblem& prob) {
  const auto& blocks = prob.blocks;
  auto check = [&](const Term& t) {
    if (t.block >= blocks.size() || t.row >= blocks[t.block].rows || t.col >= blocks[t.block].cols)
      throw std::invalid_argument("ConeProblem: term references an undeclared entry");
  };
  for (const auto& eq : prob.equalities) {
    for (const auto& t : eq.lhs) check(t);
    for (const auto& t : eq.rhs) check(t);
  }
  for (const auto& row : prob.objective)
    for (const auto& t : row.terms) check(t);
  for (const auto& t : prob.linear) check(t);

  std::vector<std::vector<bool>> dropped(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k)
    if (is_cone(blocks[k].kind)) dropped[k].assign(blocks[k].rows, false);
  auto live = [&](const Term& t) {
    if (t.weight == 0.0) return false;
    return !is_cone(blocks[t.block].kind) || !(dropped[t.block][t.row] || dropped[t.block][t.col]);
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& eq : prob.equalities) {
      if (eq.constant != 0.0) continue;
      bool ok = true;
      int sign = 0;
      std::vector<std::pair<std::size_t, std::size_t>> diag;
      auto visit = [&](const Term& t, double side) {
        if (!ok || !live(t)) return;
        const BlockKind kind = blocks[t.block].kind;
        if (!is_cone(kind) || t.row != t.col) {
          ok = false;
          return;
        }
        const double w = side * t.weight * (kind == BlockKind::NSD ? -1.0 : 1.0);
        const int sg = w > 0.0 ? 1 : -1;
        if (sign != 0 && sg != sign) ok = false;
        sign = sg;
        diag.emplace_back(t.block, t.row);
      };
      for (const auto& t : eq.lhs) visit(t, 1.0);
      for (const auto& t : eq.rhs) visit(t, -1.0);
      if (!ok) continue;
      for (const auto& [k, i] : diag)
        if (!dropped[k][i]) dropped[k][i] = changed = true;
    }
  }

  FaceReduction fr;
  fr.kept.resize(blocks.size());
  fr.target.assign(blocks.size(), -1);
  std::vector<std::vector<std::size_t>> pos(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    Block b = blocks[k];
    if (is_cone(b.kind)) {
      pos[k].assign(b.rows, 0);
      for (std::size_t i = 0; i < b.rows; ++i)
        if (!dropped[k][i]) {
          pos[k][i] = fr.kept[k].size();
          fr.kept[k].push_back(i);
        }
      if (fr.kept[k].empty()) continue;
      b.rows = b.cols = fr.kept[k].size();
    }
    fr.target[k] = static_cast<std::ptrdiff_t>(fr.reduced.blocks.size());
    fr.reduced.blocks.push_back(b);
  }
  auto map_terms = [&](const std::vector<Term>& in) {
    std::vector<Term> out;
    for (const auto& t : in) {
      if (!live(t) || fr.target[t.block] < 0) continue;
      Term m = t;
      m.block = static_cast<std::size_t>(fr.target[t.block]);
      if (is_cone(blocks[t.block].kind)) {
        m.row = pos[t.block][t.row];
        m.col = pos[t.block][t.col];
      }
      out.push_back(m);
    }
    return out;
  };
  for (const auto& eq : prob.equalities) {
    LinearEquality r{map_terms(eq.lhs), map_terms(eq.rhs), eq.constant};
    if (r.lhs.empty() && r.rhs.empty() && r.constant == 0.0) continue;
    fr.reduced.equalities.push_back(std::move(r));
  }
  for (const auto& row : prob.objective) fr.reduced.objective.push_back({map_terms(row.terms), row.target});
  fr.reduced.linear = map_terms(prob.linear);
  return fr;
}

}  // namespace detail

/// Solves the problem after structural facial reduction; dropped rows and
/// columns of semidefinite blocks come back as exact zeros.
inline ConeSolution solve(const ConeProblem& prob, const SolverConfig& cfg = {},
                          const BlockValues* warm_start = nullptr) {
  if (prob.blocks.empty()) throw std::invalid_argument("solve: problem has no blocks");
  for (const auto& b : prob.blocks)
    if (b.rows == 0 || b.cols == 0 || (is_symmetric_kind(b.kind) && b.rows != b.cols))
      throw std::invalid_argument("ConeProblem: malformed block " + b.name);
  const detail::FaceReduction fr = detail::reduce_faces(prob);
  if (fr.reduced.blocks.empty()) {
    ConeSolution sol;
    sol.values = zero_values(prob.blocks);
    sol.objective = objective_value(prob, sol.values);
    double res = 0.0;
    for (const auto& eq : prob.equalities) res = std::max(res, std::abs(residual(eq, sol.values)));
    sol.primal_residual = res;
    sol.status = res <= cfg.tol_primal ? SolveStatus::Solved : SolveStatus::InfeasibleGuess;
    return sol;
  }
  BlockValues warm;
  if (warm_start) warm = fr.restrict(*warm_start, prob.blocks);
  ConeSolution sol = detail::solve_direct(fr.reduced, cfg, warm_start ? &warm : nullptr);
  sol.values = fr.expand(sol.values, prob.blocks);
  sol.objective = objective_value(prob, sol.values);
  return sol;
}

inline void write_standard_form(std::ostream& os, const ConeProblem& prob) {
  write_blocks(os, prob.blocks);
  for (const auto& eq : prob.equalities) write_equality(os, prob.blocks, eq);
  for (const auto& row : prob.objective) {
    os << "obj " << format_double(row.target) << " :";
    for (const auto& t : row.terms) write_term(os, prob.blocks, t, 1.0);
    os << '\n';
  }
  for (const auto& t : prob.linear) {
    os << "lin";
    write_term(os, prob.blocks, t, 1.0);
    os << '\n';
  }
}

}  // namespace sosil
