#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "sosil/poly_io.hpp"
#include "sosil/polynomial.hpp"
#include "sosil/system.hpp"
#include "test_util.hpp"

namespace sosil {
namespace {

using testing::random_point;
using testing::random_polymatrix;
using testing::random_polynomial;
using testing::rel_err;

std::size_t binomial(std::size_t n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double abs_eval(const Polynomial& f, const Eigen::VectorXd& ax) {
  double s = 0.0;
  for (const auto& [e, c] : f.terms()) s += std::abs(c) * e.eval(as_span(ax));
  return s;
}

TEST(MonomialBasis, CardinalityMatchesBinomialSum) {
  for (std::size_t n = 1; n <= 4; ++n)
    for (unsigned d = 0; d <= 5; ++d) {
      std::size_t expected = 0;
      for (std::size_t i = 0; i <= d; ++i) expected += binomial(i + n - 1, n - 1);
      EXPECT_EQ(basis(n, d).size(), expected) << "n=" << n << " d=" << d;
    }
  EXPECT_EQ(basis(2, 2).size(), 6u);
}

TEST(MonomialBasis, GradedLexOrder) {
  const MonomialBasis b = basis(2, 2);
  const std::vector<std::vector<unsigned>> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  ASSERT_EQ(b.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(b[i].powers(), expected[i]);
    EXPECT_EQ(b.find(b[i]), i);
  }
  EXPECT_TRUE(std::is_sorted(b.entries().begin(), b.entries().end()));
}

TEST(MonomialBasis, SmallCases) {
  const MonomialBasis b0 = basis(1, 0);
  ASSERT_EQ(b0.size(), 1u);
  EXPECT_TRUE(b0[0].is_constant());

  const MonomialBasis b1 = basis(3, 1);
  ASSERT_EQ(b1.size(), 4u);
  EXPECT_EQ(b1[0].degree(), 0u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b1[i + 1], Exponent::unit(3, i));
  EXPECT_THROW(basis(0, 2), std::invalid_argument);
}

TEST(MonomialBasis, Deterministic) {
  const MonomialBasis a = basis(3, 3), b = basis(3, 3);
  EXPECT_EQ(a.entries(), b.entries());
}

TEST(MonomialBasis, SubsetKeepsAmbientIndices) {
  const MonomialBasis b(3, {2}, 2);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[1], Exponent::unit(3, 2));
  EXPECT_EQ(b[2].powers(), (std::vector<unsigned>{0, 0, 2}));
  const MonomialBasis none(2, {}, 3);
  EXPECT_EQ(none.size(), 1u);
}

TEST(Polynomial, Evaluation) {
  const std::size_t n = 2;
  const Polynomial x1 = Polynomial::variable(n, 0), x2 = Polynomial::variable(n, 1);
  const Polynomial f = x1 * x1 + 2.0 * x1 * x2;
  const std::vector<double> pt{1.0, 2.0};
  EXPECT_DOUBLE_EQ(eval_poly(f, pt), 5.0);
  EXPECT_EQ(Polynomial(n).eval(pt), 0.0);
  const std::vector<double> same{3.0, 3.0};
  EXPECT_EQ((x1 - x2).eval(same), 0.0);
  const std::vector<double> bad{1.0};
  EXPECT_THROW(f.eval(bad), std::invalid_argument);
}

TEST(Polynomial, DegreeAndZeroPruning) {
  const std::size_t n = 2;
  const Polynomial x1 = Polynomial::variable(n, 0);
  EXPECT_EQ(Polynomial(n).degree(), 0u);
  EXPECT_TRUE((x1 - x1).is_zero());
  EXPECT_EQ((x1 * x1 * x1).degree(), 3u);
  Polynomial p(n);
  p.add_term(Exponent(n), 1e-16);
  p.add_term(Exponent::unit(n, 1), 2.0);
  EXPECT_EQ(p.pruned(1e-14).terms().size(), 1u);
}

TEST(Polynomial, MultiplicationExamples) {
  const std::size_t n = 2;
  const Polynomial x1 = Polynomial::variable(n, 0), x2 = Polynomial::variable(n, 1);
  const Polynomial one = Polynomial::constant(n, 1.0);
  const Polynomial prod = mul(x1, x2);
  ASSERT_EQ(prod.terms().size(), 1u);
  EXPECT_EQ(prod.coefficient(Exponent({1, 1})), 1.0);
  EXPECT_EQ((x1 + one) * (x1 - one), x1 * x1 - one);
}

TEST(Polynomial, MultiplicationCommutesWithEvaluation) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Polynomial f = random_polynomial(rng, 3, 3), g = random_polynomial(rng, 3, 3);
    const Polynomial h = mul(f, g);
    if (!f.is_zero() && !g.is_zero()) {
      EXPECT_EQ(h.degree(), f.degree() + g.degree());
    }
    for (int s = 0; s < 100; ++s) {
      const Eigen::VectorXd x = random_point(rng, 3, 2.0);
      const double expect = f.eval(x) * g.eval(x);
      // Tolerance relative to the magnitude of the summed terms.
      const Eigen::VectorXd ax = x.cwiseAbs();
      const double scale = abs_eval(f, ax) * abs_eval(g, ax);
      EXPECT_NEAR(h.eval(x), expect, 1e-12 * (1.0 + scale));
    }
  }
}

TEST(Jacobian, LinearAndPowerRule) {
  const std::size_t n = 2;
  const PolyMatrix M = jacobian({Polynomial::variable(n, 0), Polynomial::variable(n, 1)});
  EXPECT_EQ(M, PolyMatrix::identity(2, n));
  EXPECT_EQ(M.degree(), 0u);

  const Polynomial x1 = Polynomial::variable(1, 0);
  const PolyMatrix J = jacobian({x1 * x1});
  EXPECT_EQ(J.entry(0, 0), 2.0 * x1);
}

TEST(Jacobian, MatchesCentralDifferences) {
  SplitMix64 rng(5);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3;
    std::vector<Polynomial> Z;
    for (int i = 0; i < 3; ++i) Z.push_back(random_polynomial(rng, n, 4, 10.0));
    const PolyMatrix M = jacobian(Z);
    for (int s = 0; s < 10; ++s) {
      const Eigen::VectorXd x = random_point(rng, n, 1.0);
      Eigen::VectorXd v = random_point(rng, n, 1.0);
      v.normalize();
      const Eigen::VectorXd xp = x + h * v, xm = x - h * v;
      const Eigen::VectorXd fd = (eval_vector(Z, as_span(xp)) - eval_vector(Z, as_span(xm))) / (2 * h);
      const Eigen::VectorXd an = M.eval(x) * v;
      EXPECT_LE(rel_err(an, fd), 1e-6);
    }
  }
}

TEST(PolyMatrixPartial, ConstantAndLinear) {
  const std::size_t n = 2;
  Eigen::MatrixXd P0(2, 2), P1(2, 2);
  P0 << 2, 1, 1, 3;
  P1 << 1, -1, -1, 4;
  EXPECT_TRUE(PolyMatrix::constant(P0, n).partial(0).is_zero());
  PolyMatrix P = PolyMatrix::constant(P0, n);
  P.add_term(Exponent::unit(n, 0), P1);
  EXPECT_EQ(partial(P, 0), PolyMatrix::constant(P1, n));
  EXPECT_TRUE(partial(P, 1).is_zero());
}

TEST(PolyMatrixPartial, MatchesFiniteDifferences) {
  SplitMix64 rng(8);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const PolyMatrix P = random_polymatrix(rng, 2, 2, 2, 3);
    for (std::size_t j = 0; j < 2; ++j) {
      const PolyMatrix dP = P.partial(j);
      const Eigen::VectorXd x = random_point(rng, 2, 1.0);
      Eigen::VectorXd xp = x, xm = x;
      xp[static_cast<Eigen::Index>(j)] += h;
      xm[static_cast<Eigen::Index>(j)] -= h;
      EXPECT_LE(rel_err(dP.eval(x), (P.eval(xp) - P.eval(xm)) / (2 * h)), 1e-6);
    }
  }
}

TEST(PolyMatrixOps, IdentityAndConstants) {
  SplitMix64 rng(3);
  const PolyMatrix M = random_polymatrix(rng, 2, 3, 2, 2);
  EXPECT_EQ(PolyMatrix::identity(2, 2) * M, M);
  const Eigen::MatrixXd a = testing::random_matrix(rng, 2, 3), b = testing::random_matrix(rng, 3, 2);
  const PolyMatrix prod = PolyMatrix::constant(a, 2) * PolyMatrix::constant(b, 2);
  EXPECT_LE(rel_err(prod.coefficient(Exponent(2)), a * b), 1e-15);
  EXPECT_THROW(M * M, std::invalid_argument);
  EXPECT_THROW(M + M.transpose(), std::invalid_argument);
}

TEST(PolyMatrixOps, EvaluationCommutes) {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const PolyMatrix A = random_polymatrix(rng, 2, 3, 2, 2), B = random_polymatrix(rng, 3, 2, 2, 2);
    const PolyMatrix C = random_polymatrix(rng, 2, 3, 2, 1);
    const PolyMatrix AB = matmul(A, B), ABt = transpose(AB), BtAt = transpose(B) * transpose(A);
    const PolyMatrix sum = add(A, C), scaled = scale(A, -2.5);
    for (int s = 0; s < 100; ++s) {
      const Eigen::VectorXd x = random_point(rng, 2, 2.0);
      const Eigen::MatrixXd a = A.eval(x), b = B.eval(x), c = C.eval(x);
      EXPECT_LE(rel_err(AB.eval(x), a * b), 1e-12);
      EXPECT_LE(rel_err(ABt.eval(x), BtAt.eval(x)), 1e-12);
      EXPECT_LE(rel_err(sum.eval(x), a + c), 1e-12);
      EXPECT_LE(rel_err(scaled.eval(x), -2.5 * a), 1e-12);
    }
  }
}

TEST(PolyMatrixOps, CoefficientsAgainstBasis) {
  SplitMix64 rng(4);
  const PolyMatrix A = random_polymatrix(rng, 1, 2, 2, 2);
  const MonomialBasis b = basis(2, 2);
  EXPECT_EQ(PolyMatrix::from_coefficients(b, A.coefficients(b)), A);
  EXPECT_THROW(A.coefficients(basis(2, 1)), std::invalid_argument);
}

TEST(SystemDef, DetectsZeroRowsAndJacobian) {
  const std::size_t n = 2;
  const Polynomial x1 = Polynomial::variable(n, 0), x2 = Polynomial::variable(n, 1);
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  const SystemDef sys = make_system(PolyMatrix::identity(2, n) * -1.0, PolyMatrix::constant(B, n), {x1, x2 * x2 + x1});
  EXPECT_EQ(sys.zero_rows, (std::vector<std::size_t>{0}));
  EXPECT_EQ(sys.M, jacobian(sys.Z));
  EXPECT_EQ(sys.M.entry(1, 1), 2.0 * x2);
}

TEST(SystemDef, RejectsNonzeroZAtOrigin) {
  const std::size_t n = 1;
  const Polynomial x1 = Polynomial::variable(n, 0);
  EXPECT_THROW(make_system(PolyMatrix::identity(1, n), PolyMatrix::identity(1, n), {x1 + Polynomial::constant(n, 1.0)}),
               std::invalid_argument);
}

TEST(PolyText, PrintsAndParses) {
  const std::size_t n = 2;
  const Polynomial x1 = Polynomial::variable(n, 0), x2 = Polynomial::variable(n, 1);
  const Polynomial f = -1.0 * Polynomial::constant(n, 1.0) + x1 - 1.5 * x1 * x1 - 0.75 * x2 * x2;
  EXPECT_EQ(to_string(f), "-1 + 1 * x1 - 1.5 * x1^2 - 0.75 * x2^2");
  EXPECT_EQ(parse_polynomial("-1 + x1 - 1.5*x1^2 - 0.75 * x2^2", n), f);
  EXPECT_EQ(parse_polynomial("0", n), Polynomial(n));
  EXPECT_EQ(parse_polynomial("2 * x1 * x1 * x2", n), 2.0 * x1 * x1 * x2);
  EXPECT_EQ(to_string(Polynomial(n)), "0");
  EXPECT_THROW(parse_polynomial("1 + x3", n), ParseError);
  EXPECT_THROW(parse_polynomial("1 + * x1", n), ParseError);
  EXPECT_THROW(parse_polynomial("1 x1", n), ParseError);
}

TEST(PolyText, RoundTripIsIdentity) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const Polynomial f = random_polynomial(rng, 3, 4, 1e3);
    EXPECT_EQ(parse_polynomial(to_string(f), 3), f) << to_string(f);
  }
  const PolyMatrix M = random_polymatrix(rng, 2, 3, 3, 2);
  std::stringstream ss;
  write_polymatrix(ss, M);
  EXPECT_EQ(read_polymatrix(ss, 3), M);
}

}  // namespace
}  // namespace sosil
