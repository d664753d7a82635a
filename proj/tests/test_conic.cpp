#include <cstring>

#include <gtest/gtest.h>

#include "sosil/conic.hpp"
#include "test_util.hpp"

using namespace sosil;
using sosil::testing::random_matrix;
using sosil::testing::random_symmetric;

namespace {

// ½‖X − S‖_F² over the upper triangle of a symmetric block.
void add_frobenius_rows(ConeProblem& prob, std::size_t block, const Eigen::MatrixXd& S) {
  for (Eigen::Index c = 0; c < S.cols(); ++c)
    for (Eigen::Index r = 0; r <= c; ++r) {
      const double w = r == c ? 1.0 : std::numbers::sqrt2;
      prob.objective.push_back(
          {{Term{block, static_cast<std::size_t>(r), static_cast<std::size_t>(c), w}}, w * S(r, c)});
    }
}

bool bitwise_equal(const BlockValues& a, const BlockValues& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    if (std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST(Jacobi, ReconstructsAndMatchesReferenceSpectrum) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(8));
    const Eigen::MatrixXd S = random_symmetric(rng, d, 3.0);
    const SymmetricEigen e = jacobi_eigen(S);
    EXPECT_LE((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - S).norm(), 1e-11);
    EXPECT_LE((e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(d, d)).norm(), 1e-11);
    Eigen::VectorXd mine = e.values;
    std::sort(mine.data(), mine.data() + mine.size());
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues();
    EXPECT_LE((mine - ref).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(PsdProject, ClampsNegativeEigenvalue) {
  Eigen::MatrixXd S(2, 2);
  S << 1, 0, 0, -1;
  Eigen::MatrixXd expect(2, 2);
  expect << 1, 0, 0, 0;
  EXPECT_LE((psd_project(S) - expect).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_LE((psd_project(I) - I).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PsdProject, BeatsRandomPsdCandidates) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd S = random_symmetric(rng, 5, 2.0);
    const double best = (psd_project(S) - S).norm();
    for (int k = 0; k < 1000; ++k) {
      const Eigen::MatrixXd G = random_matrix(rng, 5, static_cast<Eigen::Index>(1 + rng.below(5)));
      EXPECT_GE((G * G.transpose() - S).norm(), best - 1e-12);
    }
  }
}

TEST(PsdProject, IdempotentAndSpectrumIsClamped) {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(7));
    const Eigen::MatrixXd S = random_symmetric(rng, d, 4.0);
    const Eigen::MatrixXd P = psd_project(S);
    EXPECT_LE((psd_project(P) - P).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::VectorXd ls = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues();
    const Eigen::VectorXd lp = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues();
    EXPECT_LE((lp - ls.cwiseMax(0.0)).cwiseAbs().maxCoeff(), 1e-11);
    // The removed part S − P is negative semidefinite.
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P - S).eigenvalues().minCoeff(), -1e-11);
  }
}

TEST(Solve, PureProjection) {
  Eigen::MatrixXd S(2, 2);
  S << 1, 0, 0, -1;
  ConeProblem prob;
  prob.blocks = {{"Q", BlockKind::PSD, 2, 2}};
  add_frobenius_rows(prob, 0, S);
  const ConeSolution sol = solve(prob);
  ASSERT_EQ(sol.status, SolveStatus::Solved);
  Eigen::MatrixXd expect(2, 2);
  expect << 1, 0, 0, 0;
  EXPECT_LE((sol.values[0] - expect).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solve, NegativeSemidefiniteBlock) {
  Eigen::MatrixXd S(2, 2);
  S << 1, 0, 0, -1;
  ConeProblem prob;
  prob.blocks = {{"Q", BlockKind::NSD, 2, 2}};
  add_frobenius_rows(prob, 0, S);
  const ConeSolution sol = solve(prob);
  ASSERT_EQ(sol.status, SolveStatus::Solved);
  Eigen::MatrixXd expect(2, 2);
  expect << 0, 0, 0, -1;
  EXPECT_LE((sol.values[0] - expect).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sol.values[0]).eigenvalues().maxCoeff(), 1e-12);
}

TEST(Solve, ScalarConeTiedToFreeVariable) {
  ConeProblem prob;
  prob.blocks = {{"q", BlockKind::PSD, 1, 1}, {"f", BlockKind::Free, 1, 1}};
  prob.objective.push_back({{Term{0, 0, 0, 1.0}}, 3.0});
  prob.equalities.push_back({{Term{0, 0, 0, 1.0}}, {Term{1, 0, 0, 1.0}}, 0.0});
  const ConeSolution sol = solve(prob);
  ASSERT_EQ(sol.status, SolveStatus::Solved);
  EXPECT_NEAR(sol.values[0](0, 0), 3.0, 1e-6);
  EXPECT_NEAR(sol.values[1](0, 0), 3.0, 1e-6);
}

TEST(Solve, EqualityOnlyMatchesNormalEquations) {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index nv = 6, nobj = 9, neq = 3;
    const Eigen::MatrixXd W = random_matrix(rng, nobj, nv), E = random_matrix(rng, neq, nv);
    const Eigen::VectorXd b = random_matrix(rng, nobj, 1), e = random_matrix(rng, neq, 1);
    ConeProblem prob;
    prob.blocks = {{"x", BlockKind::Free, 2, 3}};
    auto term = [](Eigen::Index j, double w) {
      return Term{0, static_cast<std::size_t>(j / 3), static_cast<std::size_t>(j % 3), w};
    };
    for (Eigen::Index i = 0; i < nobj; ++i) {
      ObjectiveRow row{{}, b[i]};
      for (Eigen::Index j = 0; j < nv; ++j) row.terms.push_back(term(j, W(i, j)));
      prob.objective.push_back(row);
    }
    for (Eigen::Index i = 0; i < neq; ++i) {
      LinearEquality eq;
      for (Eigen::Index j = 0; j < nv; ++j) eq.lhs.push_back(term(j, E(i, j)));
      eq.constant = -e[i];
      prob.equalities.push_back(eq);
    }
    // Oracle: [[WᵀW, Eᵀ], [E, 0]] [x; λ] = [Wᵀb; e].
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + neq, nv + neq);
    K.topLeftCorner(nv, nv) = W.transpose() * W;
    K.topRightCorner(nv, neq) = E.transpose();
    K.bottomLeftCorner(neq, nv) = E;
    Eigen::VectorXd rhs(nv + neq);
    rhs << W.transpose() * b, e;
    const Eigen::VectorXd xs = K.fullPivLu().solve(rhs).head(nv);
    const ConeSolution sol = solve(prob);
    ASSERT_EQ(sol.status, SolveStatus::Solved);
    for (Eigen::Index j = 0; j < nv; ++j) EXPECT_NEAR(sol.values[0](j / 3, j % 3), xs[j], 1e-9);
  }
}

TEST(Solve, DropsDuplicatedEqualities) {
  ConeProblem prob;
  prob.blocks = {{"q", BlockKind::PSD, 1, 1}, {"f", BlockKind::Free, 1, 1}};
  prob.objective.push_back({{Term{1, 0, 0, 1.0}}, -2.0});
  const LinearEquality eq{{Term{0, 0, 0, 1.0}}, {Term{1, 0, 0, 1.0}}, 0.0};
  prob.equalities = {eq, eq, {{Term{0, 0, 0, 2.0}}, {Term{1, 0, 0, 2.0}}, 0.0}};
  const ConeSolution sol = solve(prob);
  ASSERT_EQ(sol.status, SolveStatus::Solved);
  EXPECT_NEAR(sol.values[0](0, 0), 0.0, 1e-6);
  EXPECT_NEAR(sol.values[1](0, 0), 0.0, 1e-6);
}

TEST(Solve, ConstructedSdpWithKnownOptimum) {
  // min ⟨C, X⟩ s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0, with C = Σ y_i A_i + S built from a
  // strictly complementary pair (X*, S*).
  SplitMix64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 4, rank = 2, m = 8;
    const Eigen::MatrixXd U = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, d, d)).householderQ();
    Eigen::VectorXd lx = Eigen::VectorXd::Zero(d), ls = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < rank; ++i) lx[i] = rng.uniform(0.5, 2.0);
    for (Eigen::Index i = rank; i < d; ++i) ls[i] = rng.uniform(0.5, 2.0);
    const Eigen::MatrixXd Xs = U * lx.asDiagonal() * U.transpose();
    const Eigen::MatrixXd Ss = U * ls.asDiagonal() * U.transpose();
    Eigen::MatrixXd C = Ss;
    ConeProblem prob;
    prob.blocks = {{"X", BlockKind::PSD, 4, 4}};
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::MatrixXd Ai = random_symmetric(rng, d);
      C += rng.uniform(-1.0, 1.0) * Ai;
      LinearEquality eq;
      for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = 0; r <= c; ++r)
          eq.lhs.push_back(
              Term{0, static_cast<std::size_t>(r), static_cast<std::size_t>(c), (r == c ? 1.0 : 2.0) * Ai(r, c)});
      eq.constant = -(Ai.cwiseProduct(Xs)).sum();
      prob.equalities.push_back(eq);
    }
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index r = 0; r <= c; ++r)
        prob.linear.push_back(
            Term{0, static_cast<std::size_t>(r), static_cast<std::size_t>(c), (r == c ? 1.0 : 2.0) * C(r, c)});
    SolverConfig cfg;
    cfg.tol_primal = cfg.tol_dual = 1e-9;
    cfg.max_iters = 50000;
    const ConeSolution sol = solve(prob, cfg);
    EXPECT_EQ(sol.status, SolveStatus::Solved) << "trial " << trial;
    EXPECT_LE((sol.values[0] - Xs).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
  }
}

TEST(Solve, SolvedImpliesResidualsWithinTolerance) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    ConeProblem prob;
    prob.blocks = {{"Q", BlockKind::PSD, 3, 3}, {"F", BlockKind::Free, 1, 2}};
    add_frobenius_rows(prob, 0, random_symmetric(rng, 3, 2.0));
    prob.equalities.push_back({{Term{0, 0, 1, 1.0}}, {Term{1, 0, 0, 1.0}}, 0.0});
    prob.equalities.push_back({{Term{0, 2, 2, 1.0}, Term{1, 0, 1, -1.0}}, {}, -0.5});
    SolverConfig cfg;
    const ConeSolution sol = solve(prob, cfg);
    ASSERT_EQ(sol.status, SolveStatus::Solved);
    EXPECT_LE(sol.primal_residual, cfg.tol_primal);
    EXPECT_LE(sol.dual_residual, cfg.tol_dual);
    EXPECT_LE(max_abs_residual(prob.equalities, sol.values), cfg.tol_primal);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sol.values[0]).eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Solve, ForcedZeroDiagonalClearsRowAndColumn) {
  // Q[1,1] = 0 forces Q's second row and column to zero, which in turn pins
  // f = Q[0,1] = 0 even though the objective pulls f toward 5.
  ConeProblem prob;
  prob.blocks = {{"Q", BlockKind::PSD, 2, 2}, {"f", BlockKind::Free, 1, 1}};
  prob.equalities.push_back({{Term{0, 1, 1, 1.0}}, {}, 0.0});
  prob.equalities.push_back({{Term{0, 0, 1, 1.0}}, {Term{1, 0, 0, 1.0}}, 0.0});
  prob.objective.push_back({{Term{1, 0, 0, 1.0}}, 5.0});
  prob.objective.push_back({{Term{0, 0, 0, 1.0}}, 2.0});
  const ConeSolution sol = solve(prob);
  ASSERT_EQ(sol.status, SolveStatus::Solved);
  EXPECT_EQ(sol.values[0](1, 1), 0.0);
  EXPECT_EQ(sol.values[0](0, 1), 0.0);
  EXPECT_NEAR(sol.values[1](0, 0), 0.0, 1e-9);
  EXPECT_NEAR(sol.values[0](0, 0), 2.0, 1e-6);
  EXPECT_LT(sol.iterations, 1000);
}

TEST(Solve, InfeasibleProblemIsFlagged) {
  ConeProblem prob;
  prob.blocks = {{"q", BlockKind::PSD, 1, 1}};
  prob.equalities.push_back({{Term{0, 0, 0, 1.0}}, {}, 1.0});  // q = −1
  SolverConfig cfg;
  cfg.max_iters = 2000;
  EXPECT_EQ(solve(prob, cfg).status, SolveStatus::InfeasibleGuess);
}

TEST(Solve, Deterministic) {
  SplitMix64 rng(55);
  ConeProblem prob;
  prob.blocks = {{"Q", BlockKind::PSD, 4, 4}};
  add_frobenius_rows(prob, 0, random_symmetric(rng, 4, 3.0));
  prob.equalities.push_back({{Term{0, 0, 0, 1.0}, Term{0, 1, 1, 1.0}}, {}, -1.0});
  const ConeSolution a = solve(prob), b = solve(prob);
  EXPECT_TRUE(bitwise_equal(a.values, b.values));
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, WarmStartReachesSameSolution) {
  SplitMix64 rng(56);
  ConeProblem prob;
  prob.blocks = {{"Q", BlockKind::PSD, 3, 3}};
  add_frobenius_rows(prob, 0, random_symmetric(rng, 3, 3.0));
  const ConeSolution cold = solve(prob);
  const ConeSolution warm = solve(prob, {}, &cold.values);
  EXPECT_LE((cold.values[0] - warm.values[0]).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(warm.iterations, cold.iterations);
}

TEST(Solve, RejectsMalformedBlocks) {
  ConeProblem prob;
  prob.blocks = {{"Q", BlockKind::PSD, 2, 3}};
  EXPECT_THROW(solve(prob), std::invalid_argument);
  prob.blocks = {{"Q", BlockKind::PSD, 2, 2}};
  prob.equalities.push_back({{Term{0, 2, 2, 1.0}}, {}, 0.0});
  EXPECT_THROW(solve(prob), std::invalid_argument);
}
