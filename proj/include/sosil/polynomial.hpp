#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sosil {

/// Multi-index α of a monomial x^α over a fixed number of variables.
class Exponent {
public:
  Exponent() = default;
  explicit Exponent(std::size_t nvars) : powers_(nvars, 0u) {}
  explicit Exponent(std::vector<unsigned> powers) : powers_(std::move(powers)) {}

  static Exponent unit(std::size_t nvars, std::size_t var) {
    Exponent e(nvars);
    e.powers_.at(var) = 1;
    return e;
  }

  std::size_t size() const { return powers_.size(); }
  unsigned operator[](std::size_t i) const { return powers_[i]; }
  unsigned& operator[](std::size_t i) { return powers_[i]; }
  const std::vector<unsigned>& powers() const { return powers_; }

  unsigned degree() const {
    unsigned d = 0;
    for (unsigned a : powers_) d += a;
    return d;
  }

  bool is_constant() const { return degree() == 0; }

  Exponent operator*(const Exponent& other) const {
    if (other.size() != size()) throw std::invalid_argument("Exponent: variable count mismatch");
    Exponent r = *this;
    for (std::size_t i = 0; i < size(); ++i) r.powers_[i] += other.powers_[i];
    return r;
  }

  double eval(std::span<const double> x) const {
    double v = 1.0;
    for (std::size_t i = 0; i < powers_.size(); ++i)
      for (unsigned k = 0; k < powers_[i]; ++k) v *= x[i];
    return v;
  }

  bool operator==(const Exponent&) const = default;

  // Graded lexicographic: lower total degree first; within a degree, the
  // exponent with the larger leading power comes first (x1 before x2).
  friend bool operator<(const Exponent& a, const Exponent& b) {
    const unsigned da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    return a.powers_ > b.powers_;
  }

private:
  std::vector<unsigned> powers_;
};

/// Ordered set 𝓜_d of all monomials of degree <= d in a subset of variables.
///
/// Exponents are stored in the ambient variable space so monomials over a
/// sub-state keep the original variable indices.
class MonomialBasis {
public:
  MonomialBasis() = default;

  MonomialBasis(std::size_t nvars, std::vector<std::size_t> variables, unsigned max_degree)
      : nvars_(nvars), variables_(std::move(variables)), max_degree_(max_degree) {
    std::sort(variables_.begin(), variables_.end());
    variables_.erase(std::unique(variables_.begin(), variables_.end()), variables_.end());
    for (std::size_t v : variables_)
      if (v >= nvars_) throw std::invalid_argument("MonomialBasis: variable index out of range");
    for (unsigned d = 0; d <= max_degree_; ++d) {
      Exponent e(nvars_);
      fill_degree(e, 0, d);
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i], i);
  }

  std::size_t nvars() const { return nvars_; }
  const std::vector<std::size_t>& variables() const { return variables_; }
  unsigned max_degree() const { return max_degree_; }
  std::size_t size() const { return entries_.size(); }
  const Exponent& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Exponent>& entries() const { return entries_; }

  /// Index of an exponent, or size() when absent.
  std::size_t find(const Exponent& e) const {
    auto it = index_.find(e);
    return it == index_.end() ? entries_.size() : it->second;
  }
  bool contains(const Exponent& e) const { return index_.count(e) != 0; }

  Eigen::VectorXd eval(std::span<const double> x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(entries_.size()));
    for (std::size_t i = 0; i < entries_.size(); ++i)
      out[static_cast<Eigen::Index>(i)] = entries_[i].eval(x);
    return out;
  }

  bool operator==(const MonomialBasis& o) const {
    return nvars_ == o.nvars_ && variables_ == o.variables_ && max_degree_ == o.max_degree_;
  }

private:
  // Enumerates exponents of total degree `remaining` over variables_[pos..]
  // in graded-lex order (leading variable takes the largest power first).
  void fill_degree(Exponent& e, std::size_t pos, unsigned remaining) {
    if (pos + 1 >= variables_.size()) {
      if (variables_.empty()) {
        if (remaining == 0) entries_.push_back(e);
        return;
      }
      e[variables_[pos]] = remaining;
      entries_.push_back(e);
      e[variables_[pos]] = 0;
      return;
    }
    for (unsigned a = remaining + 1; a-- > 0;) {
      e[variables_[pos]] = a;
      fill_degree(e, pos + 1, remaining - a);
    }
    e[variables_[pos]] = 0;
  }

  std::size_t nvars_ = 0;
  std::vector<std::size_t> variables_;
  unsigned max_degree_ = 0;
  std::vector<Exponent> entries_;
  std::map<Exponent, std::size_t> index_;
};

/// All monomials of degree <= d in all n variables.
inline MonomialBasis basis(std::size_t n, unsigned d) {
  if (n == 0) throw std::invalid_argument("basis: need at least one variable");
  std::vector<std::size_t> vars(n);
  for (std::size_t i = 0; i < n; ++i) vars[i] = i;
  return MonomialBasis(n, std::move(vars), d);
}

/// Sparse real polynomial over a fixed number of variables.
class Polynomial {
public:
  using TermMap = std::map<Exponent, double>;

  Polynomial() = default;
  explicit Polynomial(std::size_t nvars) : nvars_(nvars) {}

  static Polynomial constant(std::size_t nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Exponent(nvars), c);
    return p;
  }
  static Polynomial variable(std::size_t nvars, std::size_t var) {
    Polynomial p(nvars);
    p.add_term(Exponent::unit(nvars, var), 1.0);
    return p;
  }
  static Polynomial monomial(const Exponent& e, double c = 1.0) {
    Polynomial p(e.size());
    p.add_term(e, c);
    return p;
  }

  std::size_t nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  // Zero polynomial has degree 0.
  unsigned degree() const {
    unsigned d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e.degree());
    return d;
  }

  double coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
  }

  void add_term(const Exponent& e, double c) {
    if (e.size() != nvars_) throw std::invalid_argument("Polynomial: exponent has wrong variable count");
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  double eval(std::span<const double> x) const {
    if (x.size() != nvars_) throw std::invalid_argument("Polynomial::eval: dimension mismatch");
    double s = 0.0;
    for (const auto& [e, c] : terms_) s += c * e.eval(x);
    return s;
  }
  double eval(const Eigen::VectorXd& x) const {
    return eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  Polynomial derivative(std::size_t var) const {
    if (var >= nvars_) throw std::invalid_argument("Polynomial::derivative: variable out of range");
    Polynomial out(nvars_);
    for (const auto& [e, c] : terms_) {
      if (e[var] == 0) continue;
      Exponent d = e;
      d[var] -= 1;
      out.add_term(d, c * static_cast<double>(e[var]));
    }
    return out;
  }

  /// Drop terms with |coefficient| < tol.
  Polynomial pruned(double tol) const {
    Polynomial out(nvars_);
    for (const auto& [e, c] : terms_)
      if (std::abs(c) >= tol) out.terms_.emplace(e, c);
    return out;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_same_space(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_same_space(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_same_space(b);
    Polynomial out(a.nvars_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) out.add_term(ea * eb, ca * cb);
    return out;
  }

  bool operator==(const Polynomial& o) const { return nvars_ == o.nvars_ && terms_ == o.terms_; }

private:
  void check_same_space(const Polynomial& o) const {
    if (o.nvars_ != nvars_) throw std::invalid_argument("Polynomial: variable count mismatch");
  }

  std::size_t nvars_ = 0;
  TermMap terms_;
};

inline Polynomial mul(const Polynomial& f, const Polynomial& g) { return f * g; }
inline double eval_poly(const Polynomial& f, std::span<const double> x) { return f.eval(x); }

/// Matrix-valued polynomial Σ_i M_i x^{α_i}, stored sparsely by exponent.
class PolyMatrix {
public:
  using TermMap = std::map<Exponent, Eigen::MatrixXd>;

  PolyMatrix() = default;
  PolyMatrix(std::size_t rows, std::size_t cols, std::size_t nvars)
      : rows_(rows), cols_(cols), nvars_(nvars) {}

  static PolyMatrix constant(const Eigen::MatrixXd& m, std::size_t nvars) {
    PolyMatrix p(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), nvars);
    p.add_term(Exponent(nvars), m);
    return p;
  }

  static PolyMatrix identity(std::size_t dim, std::size_t nvars) {
    return constant(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                    nvars);
  }

  /// Build from an entry grid; all entries must share one variable count.
  static PolyMatrix from_entries(const std::vector<std::vector<Polynomial>>& entries, std::size_t nvars) {
    const std::size_t rows = entries.size();
    const std::size_t cols = rows ? entries[0].size() : 0;
    PolyMatrix out(rows, cols, nvars);
    for (std::size_t r = 0; r < rows; ++r) {
      if (entries[r].size() != cols) throw std::invalid_argument("PolyMatrix::from_entries: ragged rows");
      for (std::size_t c = 0; c < cols; ++c) {
        if (entries[r][c].nvars() != nvars)
          throw std::invalid_argument("PolyMatrix::from_entries: variable count mismatch");
        for (const auto& [e, v] : entries[r][c].terms()) out.add_entry(e, r, c, v);
      }
    }
    return out;
  }

  /// Σ_i coeffs[i] · basis[i].
  static PolyMatrix from_coefficients(const MonomialBasis& b, const std::vector<Eigen::MatrixXd>& coeffs) {
    if (coeffs.size() != b.size()) throw std::invalid_argument("PolyMatrix::from_coefficients: size mismatch");
    if (coeffs.empty()) throw std::invalid_argument("PolyMatrix::from_coefficients: empty basis");
    PolyMatrix out(static_cast<std::size_t>(coeffs[0].rows()), static_cast<std::size_t>(coeffs[0].cols()),
                   b.nvars());
    for (std::size_t i = 0; i < coeffs.size(); ++i) out.add_term(b[i], coeffs[i]);
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  unsigned degree() const {
    unsigned d = 0;
    for (const auto& [e, m] : terms_) d = std::max(d, e.degree());
    return d;
  }

  Eigen::MatrixXd zero_matrix() const {
    return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  }

  Eigen::MatrixXd coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? zero_matrix() : it->second;
  }

  /// Coefficient matrices aligned with `b`; throws if a term falls outside it.
  std::vector<Eigen::MatrixXd> coefficients(const MonomialBasis& b) const {
    std::vector<Eigen::MatrixXd> out(b.size(), zero_matrix());
    for (const auto& [e, m] : terms_) {
      const std::size_t i = b.find(e);
      if (i == b.size()) throw std::invalid_argument("PolyMatrix::coefficients: term outside basis");
      out[i] = m;
    }
    return out;
  }

  void add_term(const Exponent& e, const Eigen::MatrixXd& m) {
    if (e.size() != nvars_) throw std::invalid_argument("PolyMatrix: exponent has wrong variable count");
    if (static_cast<std::size_t>(m.rows()) != rows_ || static_cast<std::size_t>(m.cols()) != cols_)
      throw std::invalid_argument("PolyMatrix: coefficient shape mismatch");
    auto [it, inserted] = terms_.try_emplace(e, m);
    if (!inserted) it->second += m;
    if (it->second.isZero(0.0)) terms_.erase(it);
  }

  void add_entry(const Exponent& e, std::size_t r, std::size_t c, double v) {
    if (v == 0.0) return;
    Eigen::MatrixXd m = zero_matrix();
    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    add_term(e, m);
  }

  Polynomial entry(std::size_t r, std::size_t c) const {
    Polynomial p(nvars_);
    for (const auto& [e, m] : terms_) p.add_term(e, m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    return p;
  }

  Eigen::MatrixXd eval(std::span<const double> x) const {
    if (x.size() != nvars_) throw std::invalid_argument("PolyMatrix::eval: dimension mismatch");
    Eigen::MatrixXd out = zero_matrix();
    for (const auto& [e, m] : terms_) out += e.eval(x) * m;
    return out;
  }
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const {
    return eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  PolyMatrix transpose() const {
    PolyMatrix out(cols_, rows_, nvars_);
    for (const auto& [e, m] : terms_) out.terms_.emplace(e, m.transpose());
    return out;
  }

  /// Term-by-term ∂/∂x_var.
  PolyMatrix partial(std::size_t var) const {
    if (var >= nvars_) throw std::invalid_argument("PolyMatrix::partial: variable out of range");
    PolyMatrix out(rows_, cols_, nvars_);
    for (const auto& [e, m] : terms_) {
      if (e[var] == 0) continue;
      Exponent d = e;
      d[var] -= 1;
      out.add_term(d, static_cast<double>(e[var]) * m);
    }
    return out;
  }

  /// Row `r` as a 1 x cols PolyMatrix.
  PolyMatrix row(std::size_t r) const {
    PolyMatrix out(1, cols_, nvars_);
    for (const auto& [e, m] : terms_) out.add_term(e, m.row(static_cast<Eigen::Index>(r)));
    return out;
  }

  PolyMatrix pruned(double tol) const {
    PolyMatrix out(rows_, cols_, nvars_);
    for (const auto& [e, m] : terms_) {
      Eigen::MatrixXd k = m;
      for (Eigen::Index i = 0; i < k.size(); ++i)
        if (std::abs(k.data()[i]) < tol) k.data()[i] = 0.0;
      out.add_term(e, k);
    }
    return out;
  }

  bool is_symmetric(double tol = 0.0) const {
    if (rows_ != cols_) return false;
    for (const auto& [e, m] : terms_)
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) return false;
    return true;
  }

  PolyMatrix& operator+=(const PolyMatrix& o) {
    check_shape(o);
    for (const auto& [e, m] : o.terms_) add_term(e, m);
    return *this;
  }
  PolyMatrix& operator-=(const PolyMatrix& o) {
    check_shape(o);
    for (const auto& [e, m] : o.terms_) add_term(e, -m);
    return *this;
  }
  PolyMatrix& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, m] : terms_) m *= s;
    return *this;
  }

  friend PolyMatrix operator+(PolyMatrix a, const PolyMatrix& b) { return a += b; }
  friend PolyMatrix operator-(PolyMatrix a, const PolyMatrix& b) { return a -= b; }
  friend PolyMatrix operator*(PolyMatrix a, double s) { return a *= s; }
  friend PolyMatrix operator*(double s, PolyMatrix a) { return a *= s; }

  friend PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("PolyMatrix: shape mismatch in product");
    if (a.nvars_ != b.nvars_) throw std::invalid_argument("PolyMatrix: variable count mismatch");
    PolyMatrix out(a.rows_, b.cols_, a.nvars_);
    for (const auto& [ea, ma] : a.terms_)
      for (const auto& [eb, mb] : b.terms_) out.add_term(ea * eb, ma * mb);
    return out;
  }

  /// Scalar polynomial times matrix.
  friend PolyMatrix operator*(const Polynomial& f, const PolyMatrix& a) {
    if (f.nvars() != a.nvars_) throw std::invalid_argument("PolyMatrix: variable count mismatch");
    PolyMatrix out(a.rows_, a.cols_, a.nvars_);
    for (const auto& [ef, cf] : f.terms())
      for (const auto& [ea, ma] : a.terms_) out.add_term(ef * ea, cf * ma);
    return out;
  }

  bool operator==(const PolyMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_ || nvars_ != o.nvars_ || terms_.size() != o.terms_.size()) return false;
    auto it = o.terms_.begin();
    for (const auto& [e, m] : terms_) {
      if (!(e == it->first) || m != it->second) return false;
      ++it;
    }
    return true;
  }

private:
  void check_shape(const PolyMatrix& o) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("PolyMatrix: shape mismatch");
    if (o.nvars_ != nvars_) throw std::invalid_argument("PolyMatrix: variable count mismatch");
  }

  std::size_t rows_ = 0, cols_ = 0, nvars_ = 0;
  TermMap terms_;
};

inline PolyMatrix matmul(const PolyMatrix& a, const PolyMatrix& b) { return a * b; }
inline PolyMatrix transpose(const PolyMatrix& a) { return a.transpose(); }
inline PolyMatrix add(const PolyMatrix& a, const PolyMatrix& b) { return a + b; }
inline PolyMatrix scale(const PolyMatrix& a, double s) { return a * s; }
inline PolyMatrix partial(const PolyMatrix& a, std::size_t var) { return a.partial(var); }

/// Column vector of polynomials as a p x 1 PolyMatrix.
inline PolyMatrix column(const std::vector<Polynomial>& z) {
  if (z.empty()) throw std::invalid_argument("column: empty vector");
  std::vector<std::vector<Polynomial>> grid;
  for (const auto& p : z) grid.push_back({p});
  return PolyMatrix::from_entries(grid, z[0].nvars());
}

/// p x n matrix of partial derivatives ∂Z_i/∂x_j.
inline PolyMatrix jacobian(const std::vector<Polynomial>& z) {
  if (z.empty()) throw std::invalid_argument("jacobian: empty vector");
  const std::size_t n = z[0].nvars();
  std::vector<std::vector<Polynomial>> grid(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) grid[i].push_back(z[i].derivative(j));
  return PolyMatrix::from_entries(grid, n);
}

inline Eigen::VectorXd eval_vector(const std::vector<Polynomial>& z, std::span<const double> x) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) out[static_cast<Eigen::Index>(i)] = z[i].eval(x);
  return out;
}

inline std::span<const double> as_span(const Eigen::VectorXd& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}

}  // namespace sosil
