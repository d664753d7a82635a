#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sosil/conic.hpp"
#include "sosil/linear_model.hpp"
#include "sosil/polynomial.hpp"
#include "sosil/rng.hpp"
#include "sosil/sos.hpp"
#include "sosil/system.hpp"

namespace sosil {

// Seed streams derived from a run seed.
inline constexpr std::uint64_t kDataStream = 0;
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kMinibatchStream = 2;

/// Demonstrations (x̂_i, û_i). Noise on û has covariance sigma·I.
struct Dataset {
  std::vector<Eigen::VectorXd> x, u;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  double box_halfwidth = 0.0;

  std::size_t size() const { return x.size(); }
};

/// u = K(x) Z(x).
inline Eigen::VectorXd controller_output(const PolyMatrix& K, const SystemDef& sys, std::span<const double> x) {
  return K.eval(x) * sys.eval_z(x);
}

/// States uniform on [−box, box]ⁿ, inputs from the expert plus √sigma·N(0, I).
/// Draw order per sample: n uniforms for the state, then m normals.
inline Dataset generate_data(const SystemDef& sys, const PolyMatrix& expert, std::size_t N, double sigma, double box,
                             std::uint64_t seed) {
  if (N == 0) throw std::invalid_argument("generate_data: N must be at least 1");
  if (!(box > 0.0)) throw std::invalid_argument("generate_data: box must be positive");
  if (sigma < 0.0) throw std::invalid_argument("generate_data: sigma must be nonnegative");
  if (expert.rows() != sys.m || expert.cols() != sys.p || expert.nvars() != sys.n)
    throw std::invalid_argument("generate_data: expert must be m x p over the state");
  Dataset d;
  d.seed = seed;
  d.sigma = sigma;
  d.box_halfwidth = box;
  SplitMix64 rng(derive_seed(seed, kDataStream));
  const double scale = std::sqrt(sigma);
  const auto n = static_cast<Eigen::Index>(sys.n), m = static_cast<Eigen::Index>(sys.m);
  for (std::size_t s = 0; s < N; ++s) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.uniform(-box, box);
    Eigen::VectorXd u = controller_output(expert, sys, as_span(x));
    for (Eigen::Index i = 0; i < m; ++i) u[i] += scale * rng.normal();
    d.x.push_back(std::move(x));
    d.u.push_back(std::move(u));
  }
  return d;
}

/// (1/N) Σ ‖K(x̂_i) Z(x̂_i) − û_i‖².
inline double imitation_loss(const PolyMatrix& K, const SystemDef& sys, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("imitation_loss: empty dataset");
  if (K.rows() != sys.m || K.cols() != sys.p) throw std::invalid_argument("imitation_loss: K must be m x p");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += (controller_output(K, sys, as_span(data.x[i])) - data.u[i]).squaredNorm();
  return s / static_cast<double>(data.size());
}

/// Bases for K (over x), P (over x̃) and F (over x), plus sets[k] = 𝓔[k]:
/// the (i, j) with k_basis[i]·p_basis[j] = f_basis[k].
struct IndexSets {
  MonomialBasis k_basis, p_basis, f_basis;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> sets;
};

inline IndexSets index_sets(std::size_t nvars, unsigned d_K, unsigned d_P, unsigned d_F,
                            const std::vector<std::size_t>& reduced_vars) {
  if (d_F < d_K + d_P) throw std::invalid_argument("index_sets: d_F must be at least d_K + d_P");
  IndexSets s{basis(nvars, d_K), MonomialBasis(nvars, reduced_vars, d_P), basis(nvars, d_F), {}};
  s.sets.resize(s.f_basis.size());
  for (std::size_t i = 0; i < s.k_basis.size(); ++i)
    for (std::size_t j = 0; j < s.p_basis.size(); ++j) {
      const std::size_t k = s.f_basis.find(s.k_basis[i] * s.p_basis[j]);
      if (k == s.f_basis.size()) throw std::logic_error("index_sets: product outside the F basis");
      s.sets[k].emplace_back(i, j);
    }
  return s;
}

struct LearningConfig {
  unsigned d_K = 0, d_P = 0, d_F = 0;
  double eps1 = kDefaultEps1, eps2 = kDefaultEps2;
  double rho = 1.0;
  double alpha = 1e-5;
  int iterations = 50;
  double init_halfwidth = 5.0;
  std::uint64_t seed = 0;
  std::size_t minibatch = 0;  // 0: full batch
  SolverConfig solver = certificate_solver_config();

  static SolverConfig certificate_solver_config() {
    SolverConfig c;
    c.tol_primal = 1e-9;
    c.tol_dual = 1e-9;
    return c;
  }
};

/// Coefficients of F, P, Q₁, Q₂ laid out as the blocks of a GramConstraintSet.
/// `residual` is the largest compiled-equality violation of the values and
/// `certified` is set when it is within 1e-6 (cone membership is exact, since
/// the solver's last map is the cone projection). `converged` records whether
/// the producing solve also met its optimality tolerance.
struct CertifiedFactors {
  BlockValues values;
  double residual = std::numeric_limits<double>::infinity();
  bool certified = false;
  bool converged = false;
};

/// Everything that stays fixed across the iterations of one run.
struct LearningSetup {
  SystemDef sys;
  LearningConfig cfg;
  GramConstraintSet gcs;
  IndexSets sets;
  const Dataset* data = nullptr;
  // Column n holds Z(x̂_n) and the K, P, F monomials at x̂_n.
  Eigen::MatrixXd z, mk, mp, mf;

  std::size_t n_k() const { return sets.k_basis.size(); }
  std::size_t n_p() const { return sets.p_basis.size(); }
  std::size_t n_f() const { return sets.f_basis.size(); }

  const Eigen::MatrixXd& P(const CertifiedFactors& cf, std::size_t j) const { return cf.values.at(gcs.p_block(j)); }
  const Eigen::MatrixXd& F(const CertifiedFactors& cf, std::size_t k) const { return cf.values.at(gcs.f_block(k)); }
  Eigen::MatrixXd& P(CertifiedFactors& cf, std::size_t j) const { return cf.values.at(gcs.p_block(j)); }
  Eigen::MatrixXd& F(CertifiedFactors& cf, std::size_t k) const { return cf.values.at(gcs.f_block(k)); }
};

/// The dataset is referenced, not copied; it must outlive the setup.
inline LearningSetup make_setup(const SystemDef& sys, const Dataset& data, const LearningConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("make_setup: empty dataset");
  LearningSetup s;
  s.sys = sys;
  s.cfg = cfg;
  s.sets = index_sets(sys.n, cfg.d_K, cfg.d_P, cfg.d_F, sys.reduced_vars());
  s.gcs = compile_certificate(sys, cfg.d_P, cfg.d_F, cfg.eps1, cfg.eps2);
  s.data = &data;
  const auto N = static_cast<Eigen::Index>(data.size());
  s.z.resize(static_cast<Eigen::Index>(sys.p), N);
  s.mk.resize(static_cast<Eigen::Index>(s.n_k()), N);
  s.mp.resize(static_cast<Eigen::Index>(s.n_p()), N);
  s.mf.resize(static_cast<Eigen::Index>(s.n_f()), N);
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto x = as_span(data.x[static_cast<std::size_t>(n)]);
    s.z.col(n) = sys.eval_z(x);
    s.mk.col(n) = s.sets.k_basis.eval(x);
    s.mp.col(n) = s.sets.p_basis.eval(x);
    s.mf.col(n) = s.sets.f_basis.eval(x);
  }
  return s;
}

inline PolyMatrix controller_poly(const LearningSetup& s, const std::vector<Eigen::MatrixXd>& K) {
  return PolyMatrix::from_coefficients(s.sets.k_basis, K);
}

/// Imitation loss of Σ_i K_i k_i(x) Z(x) on the setup's data.
inline double k_loss(const LearningSetup& s, const std::vector<Eigen::MatrixXd>& K) {
  const Eigen::Index N = s.z.cols();
  double total = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.sys.m));
    for (std::size_t i = 0; i < K.size(); ++i) u += s.mk(static_cast<Eigen::Index>(i), n) * (K[i] * s.z.col(n));
    total += (u - s.data->u[static_cast<std::size_t>(n)]).squaredNorm();
  }
  return total / static_cast<double>(N);
}

namespace detail {

inline Eigen::MatrixXd eval_factor(const LearningSetup& s, const CertifiedFactors& cf, bool p_side, Eigen::Index n) {
  const Eigen::MatrixXd& mono = p_side ? s.mp : s.mf;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p_side ? s.sys.p : s.sys.m),
                                              static_cast<Eigen::Index>(s.sys.p));
  for (Eigen::Index j = 0; j < mono.rows(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    out += mono(j, n) * (p_side ? s.P(cf, idx) : s.F(cf, idx));
  }
  return out;
}

inline Eigen::PartialPivLU<Eigen::MatrixXd> factor_P(const Eigen::MatrixXd& P) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(P);
  if (!(lu.rcond() > 1e-14)) throw std::domain_error("P is singular at a datapoint");
  return lu;
}

}  // namespace detail

/// Imitation loss of K = F P⁻¹ on the setup's data.
inline double certified_loss(const LearningSetup& s, const CertifiedFactors& cf) {
  const Eigen::Index N = s.z.cols();
  double total = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    const Eigen::VectorXd w = detail::factor_P(detail::eval_factor(s, cf, true, n)).solve(s.z.col(n));
    const Eigen::VectorXd u = detail::eval_factor(s, cf, false, n) * w;
    total += (u - s.data->u[static_cast<std::size_t>(n)]).squaredNorm();
  }
  return total / static_cast<double>(N);
}

/// Σ_{(i,j) ∈ 𝓔[k]} K_i P_j.
inline Eigen::MatrixXd k_times_p(const LearningSetup& s, const std::vector<Eigen::MatrixXd>& K,
                                 const CertifiedFactors& cf, std::size_t k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.sys.m), static_cast<Eigen::Index>(s.sys.p));
  for (const auto& [i, j] : s.sets.sets[k]) out += K[i] * s.P(cf, j);
  return out;
}

struct AdmmState {
  std::vector<Eigen::MatrixXd> K;  // over sets.k_basis
  CertifiedFactors cf;
  std::vector<Eigen::MatrixXd> Y;  // over sets.f_basis
  double rho = 1.0;
};

/// 𝓛_ρ = J({K_i}) + Σ_k (ρ/2)‖F_k − Σ_{𝓔[k]} K_i P_j + Y_k‖²_F.
inline double augmented_lagrangian(const LearningSetup& s, const AdmmState& st) {
  double pen = 0.0;
  for (std::size_t k = 0; k < s.n_f(); ++k)
    pen += (s.F(st.cf, k) - k_times_p(s, st.K, st.cf, k) + st.Y[k]).squaredNorm();
  return k_loss(s, st.K) + 0.5 * st.rho * pen;
}

/// Exact minimizer of 𝓛_ρ over {K_i}. Rows of K decouple; each row θ (laid
/// out θ[i·p + s] = K_i(r, s)) solves one shared normal matrix. `data_weight`
/// scales J; 0 leaves the penalty alone.
inline std::vector<Eigen::MatrixXd> admm_k_step(const LearningSetup& s, const AdmmState& st,
                                                double data_weight = 1.0) {
  if (!(st.rho > 0.0)) throw std::invalid_argument("admm_k_step: rho must be positive");
  const auto p = static_cast<Eigen::Index>(s.sys.p), m = static_cast<Eigen::Index>(s.sys.m);
  const auto nk = static_cast<Eigen::Index>(s.n_k());
  const Eigen::Index D = nk * p, N = s.z.cols();

  Eigen::MatrixXd Psi(D, N);
  for (Eigen::Index i = 0; i < nk; ++i) Psi.middleRows(i * p, p) = s.z.array().rowwise() * s.mk.row(i).array();
  Eigen::MatrixXd U(m, N);
  for (Eigen::Index n = 0; n < N; ++n) U.col(n) = s.data->u[static_cast<std::size_t>(n)];

  const double w = 2.0 * data_weight / static_cast<double>(N);
  Eigen::MatrixXd H = w * Psi * Psi.transpose();
  Eigen::MatrixXd rhs = w * Psi * U.transpose();  // column r is the right side for row r

  for (std::size_t k = 0; k < s.n_f(); ++k) {
    if (s.sets.sets[k].empty()) continue;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, D);
    for (const auto& [i, j] : s.sets.sets[k])
      L.middleCols(static_cast<Eigen::Index>(i) * p, p) += s.P(st.cf, j).transpose();
    const Eigen::MatrixXd C = s.F(st.cf, k) + st.Y[k];  // row r is c_kᵀ
    H.noalias() += st.rho * L.transpose() * L;
    rhs.noalias() += st.rho * L.transpose() * C.transpose();
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw std::runtime_error("admm_k_step: singular normal matrix");
  const Eigen::MatrixXd theta = ldlt.solve(rhs);

  std::vector<Eigen::MatrixXd> K(s.n_k(), Eigen::MatrixXd(m, p));
  for (Eigen::Index i = 0; i < nk; ++i)
    K[static_cast<std::size_t>(i)] = theta.middleRows(i * p, p).transpose();
  return K;
}

namespace detail {

inline CertifiedFactors from_solution(const LearningSetup& s, ConeSolution&& sol) {
  CertifiedFactors cf;
  cf.residual = max_abs_residual(s.gcs.equalities, sol.values);
  cf.certified = cf.residual <= 1e-6;
  cf.converged = sol.status == SolveStatus::Solved;
  cf.values = std::move(sol.values);
  return cf;
}

inline ConeProblem certificate_problem(const LearningSetup& s) {
  ConeProblem prob;
  prob.blocks = s.gcs.blocks;
  prob.equalities = s.gcs.equalities;
  return prob;
}

}  // namespace detail

/// min Σ_k (ρ/2)‖F_k − Σ_{𝓔[k]} K_i P_j + Y_k‖² over the certified set.
inline CertifiedFactors admm_fp_step(const LearningSetup& s, const AdmmState& st) {
  ConeProblem prob = detail::certificate_problem(s);
  const double w = std::sqrt(st.rho);
  const auto p = static_cast<Eigen::Index>(s.sys.p), m = static_cast<Eigen::Index>(s.sys.m);
  for (std::size_t k = 0; k < s.n_f(); ++k)
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < p; ++c) {
        ObjectiveRow row;
        row.terms.push_back({s.gcs.f_block(k), static_cast<std::size_t>(r), static_cast<std::size_t>(c), w});
        for (const auto& [i, j] : s.sets.sets[k])
          for (Eigen::Index t = 0; t < p; ++t) {
            const double kv = st.K[i](r, t);
            if (kv == 0.0) continue;
            const auto a = static_cast<std::size_t>(std::min(t, c)), b = static_cast<std::size_t>(std::max(t, c));
            row.terms.push_back({s.gcs.p_block(j), a, b, -w * kv});
          }
        row.terms = merge_terms(row.terms);
        row.target = -w * st.Y[k](r, c);
        prob.objective.push_back(std::move(row));
      }
  return detail::from_solution(s, solve(prob, s.cfg.solver, &st.cf.values));
}

/// Y_k += F_k − Σ_{𝓔[k]} K_i P_j.
inline std::vector<Eigen::MatrixXd> admm_dual_step(const LearningSetup& s, const AdmmState& st) {
  std::vector<Eigen::MatrixXd> Y = st.Y;
  for (std::size_t k = 0; k < s.n_f(); ++k) Y[k] += s.F(st.cf, k) - k_times_p(s, st.K, st.cf, k);
  return Y;
}

/// Gradient of the loss of F P⁻¹ with respect to each F_k and each symmetric
/// P_j. The P part is the symmetric Frobenius gradient: moving entries (a, b)
/// and (b, a) together by h changes the loss by 2h·G(a, b) off the diagonal.
struct FactorGradient {
  std::vector<Eigen::MatrixXd> F, P;
};

/// Uses the datapoints listed in `batch`, or all of them when it is empty.
inline FactorGradient pgd_gradient(const LearningSetup& s, const CertifiedFactors& cf,
                                   const std::vector<std::size_t>& batch = {}) {
  const auto p = static_cast<Eigen::Index>(s.sys.p), m = static_cast<Eigen::Index>(s.sys.m);
  FactorGradient g{std::vector<Eigen::MatrixXd>(s.n_f(), Eigen::MatrixXd::Zero(m, p)),
                   std::vector<Eigen::MatrixXd>(s.n_p(), Eigen::MatrixXd::Zero(p, p))};
  const std::size_t B = batch.empty() ? s.data->size() : batch.size();
  const double scale = 2.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto n = static_cast<Eigen::Index>(batch.empty() ? b : batch[b]);
    const Eigen::MatrixXd Px = detail::eval_factor(s, cf, true, n);
    const Eigen::MatrixXd Fx = detail::eval_factor(s, cf, false, n);
    const auto lu = detail::factor_P(Px);
    const Eigen::VectorXd w = lu.solve(s.z.col(n));
    const Eigen::VectorXd e = Fx * w - s.data->u[static_cast<std::size_t>(n)];
    const Eigen::MatrixXd gF = scale * e * w.transpose();
    // d(P⁻¹) = −P⁻¹ dP P⁻¹; P is symmetric so P⁻ᵀ = P⁻¹.
    const Eigen::VectorXd q = lu.solve(Fx.transpose() * e);
    Eigen::MatrixXd gP = -scale * q * w.transpose();
    gP = 0.5 * (gP + gP.transpose()).eval();
    for (std::size_t k = 0; k < s.n_f(); ++k) g.F[k] += s.mf(static_cast<Eigen::Index>(k), n) * gF;
    for (std::size_t j = 0; j < s.n_p(); ++j) g.P[j] += s.mp(static_cast<Eigen::Index>(j), n) * gP;
  }
  return g;
}

/// Euclidean projection of (F̃, P̃) onto the certified set. `guess` supplies
/// the other blocks' warm start when given.
inline CertifiedFactors pgd_project(const LearningSetup& s, const std::vector<Eigen::MatrixXd>& F_tilde,
                                    const std::vector<Eigen::MatrixXd>& P_tilde,
                                    const CertifiedFactors* guess = nullptr) {
  if (F_tilde.size() != s.n_f() || P_tilde.size() != s.n_p())
    throw std::invalid_argument("pgd_project: coefficient counts do not match the bases");
  ConeProblem prob = detail::certificate_problem(s);
  const double r2 = std::sqrt(2.0);
  for (std::size_t k = 0; k < s.n_f(); ++k)
    for (Eigen::Index r = 0; r < F_tilde[k].rows(); ++r)
      for (Eigen::Index c = 0; c < F_tilde[k].cols(); ++c)
        prob.objective.push_back(
            {{{s.gcs.f_block(k), static_cast<std::size_t>(r), static_cast<std::size_t>(c), 1.0}}, F_tilde[k](r, c)});
  for (std::size_t j = 0; j < s.n_p(); ++j) {
    const Eigen::MatrixXd Ps = 0.5 * (P_tilde[j] + P_tilde[j].transpose());
    for (Eigen::Index c = 0; c < Ps.cols(); ++c)
      for (Eigen::Index r = 0; r <= c; ++r) {
        const double w = r == c ? 1.0 : r2;
        prob.objective.push_back(
            {{{s.gcs.p_block(j), static_cast<std::size_t>(r), static_cast<std::size_t>(c), w}}, w * Ps(r, c)});
      }
  }
  BlockValues warm;
  if (guess) {
    warm = guess->values;
  } else {
    warm = zero_values(s.gcs.blocks);
  }
  for (std::size_t k = 0; k < s.n_f(); ++k) warm.at(s.gcs.f_block(k)) = F_tilde[k];
  for (std::size_t j = 0; j < s.n_p(); ++j) warm.at(s.gcs.p_block(j)) = 0.5 * (P_tilde[j] + P_tilde[j].transpose());
  return detail::from_solution(s, solve(prob, s.cfg.solver, &warm));
}

/// u = gain(x) Z(x) with gain = F(x) P(x̃)⁻¹. For constant P the gain is also
/// available as an exact polynomial matrix.
class Controller {
public:
  static Controller polynomial(PolyMatrix K) {
    Controller c;
    c.symbolic_ = std::move(K);
    return c;
  }

  static Controller factored(PolyMatrix F, PolyMatrix P) {
    Controller c;
    c.F_ = std::move(F);
    c.P_ = std::move(P);
    return c;
  }

  const std::optional<PolyMatrix>& symbolic() const { return symbolic_; }

  Eigen::MatrixXd gain(std::span<const double> x) const {
    if (symbolic_) return symbolic_->eval(x);
    const Eigen::MatrixXd Px = P_.eval(x);
    return detail::factor_P(Px).solve(F_.eval(x).transpose()).transpose();
  }

  Eigen::VectorXd input(const SystemDef& sys, std::span<const double> x) const { return gain(x) * sys.eval_z(x); }

private:
  std::optional<PolyMatrix> symbolic_;
  PolyMatrix F_, P_;
};

inline Controller extract_controller(const GramConstraintSet& g, const CertifiedFactors& cf) {
  const PolyMatrix F = assemble_F(g, cf.values);
  const PolyMatrix P = assemble_P(g, cf.values);
  if (P.degree() == 0) {
    const Eigen::MatrixXd P0 = P.coefficient(Exponent(P.nvars()));
    const auto lu = detail::factor_P(P0);
    const Eigen::MatrixXd inv = lu.inverse();
    return Controller::polynomial(F * PolyMatrix::constant(0.5 * (inv + inv.transpose()), P.nvars()));
  }
  return Controller::factored(F, P);
}

/// Outcome of one ADMM or PGD run.
///
/// `loss_trace[l]` is the loss after iteration l + 1: on {K_i} for ADMM, on
/// F P⁻¹ for PGD. `certified_trace` is always the loss of F P⁻¹.
/// `initial_loss` is the same quantity as `loss_trace` at the initialization.
struct RunResult {
  std::vector<Eigen::MatrixXd> K;
  CertifiedFactors cf;
  std::vector<Eigen::MatrixXd> Y;
  std::vector<double> loss_trace, certified_trace;
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  double worst_residual = 0.0;
  int uncertified_steps = 0;
  int unconverged_steps = 0;
  bool ok = true;
  std::string error;
};

namespace detail {

inline double draw(SplitMix64& rng, double h) { return rng.uniform(-h, h); }

/// Draw order: K_i row-major, P_j upper triangle column by column, F_k row-major.
inline AdmmState random_state(const LearningSetup& s, SplitMix64& rng, bool with_K) {
  const double h = s.cfg.init_halfwidth;
  const auto p = static_cast<Eigen::Index>(s.sys.p), m = static_cast<Eigen::Index>(s.sys.m);
  AdmmState st;
  st.rho = s.cfg.rho;
  if (with_K)
    for (std::size_t i = 0; i < s.n_k(); ++i) {
      Eigen::MatrixXd K(m, p);
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < p; ++c) K(r, c) = draw(rng, h);
      st.K.push_back(std::move(K));
    }
  st.cf.values = zero_values(s.gcs.blocks);
  st.cf.certified = false;
  for (std::size_t j = 0; j < s.n_p(); ++j) {
    Eigen::MatrixXd& P = s.P(st.cf, j);
    for (Eigen::Index c = 0; c < p; ++c)
      for (Eigen::Index r = 0; r <= c; ++r) P(r, c) = P(c, r) = draw(rng, h);
  }
  for (std::size_t k = 0; k < s.n_f(); ++k) {
    Eigen::MatrixXd& F = s.F(st.cf, k);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < p; ++c) F(r, c) = draw(rng, h);
  }
  st.cf.residual = max_abs_residual(s.gcs.equalities, st.cf.values);
  st.Y.assign(s.n_f(), Eigen::MatrixXd::Zero(m, p));
  return st;
}

inline void note_factors(RunResult& r, const CertifiedFactors& cf) {
  r.worst_residual = std::max(r.worst_residual, cf.residual);
  if (!cf.certified) ++r.uncertified_steps;
  if (!cf.converged) ++r.unconverged_steps;
}

}  // namespace detail

/// ADMM initial point: K, P, F uniform on [−h, h], Y = 0.
inline AdmmState admm_initial_state(const LearningSetup& s) {
  SplitMix64 rng(derive_seed(s.cfg.seed, kInitStream));
  return detail::random_state(s, rng, true);
}

/// Alternates K-step, FP-step and dual step. A thrown subproblem failure stops
/// the run and leaves the partial trace with ok = false.
inline RunResult run_admm(const LearningSetup& s, const AdmmState* init = nullptr) {
  if (!(s.cfg.rho > 0.0)) throw std::invalid_argument("run_admm: rho must be positive");
  if (s.cfg.iterations < 0) throw std::invalid_argument("run_admm: iterations must be nonnegative");
  AdmmState st = init ? *init : admm_initial_state(s);
  st.rho = s.cfg.rho;
  RunResult r;
  r.initial_loss = k_loss(s, st.K);
  try {
    for (int l = 0; l < s.cfg.iterations; ++l) {
      st.K = admm_k_step(s, st);
      st.cf = admm_fp_step(s, st);
      st.Y = admm_dual_step(s, st);
      detail::note_factors(r, st.cf);
      r.loss_trace.push_back(k_loss(s, st.K));
      r.certified_trace.push_back(certified_loss(s, st.cf));
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.K = st.K;
  r.cf = st.cf;
  r.Y = st.Y;
  return r;
}

/// PGD initial point: P, F uniform on [−h, h], projected onto the certified set.
inline CertifiedFactors pgd_initial_factors(const LearningSetup& s) {
  SplitMix64 rng(derive_seed(s.cfg.seed, kInitStream));
  const AdmmState raw = detail::random_state(s, rng, false);
  std::vector<Eigen::MatrixXd> F, P;
  for (std::size_t k = 0; k < s.n_f(); ++k) F.push_back(s.F(raw.cf, k));
  for (std::size_t j = 0; j < s.n_p(); ++j) P.push_back(s.P(raw.cf, j));
  return pgd_project(s, F, P);
}

/// Gradient step on every F_k and P_j, then projection. With a minibatch size
/// below N, each step uses a fresh uniform subsample without replacement.
inline RunResult run_pgd(const LearningSetup& s, const CertifiedFactors* init = nullptr) {
  if (!(s.cfg.alpha >= 0.0)) throw std::invalid_argument("run_pgd: alpha must be nonnegative");
  if (s.cfg.iterations < 0) throw std::invalid_argument("run_pgd: iterations must be nonnegative");
  RunResult r;
  CertifiedFactors cf = init ? *init : pgd_initial_factors(s);
  detail::note_factors(r, cf);
  SplitMix64 rng(derive_seed(s.cfg.seed, kMinibatchStream));
  const std::size_t N = s.data->size();
  const bool sub = s.cfg.minibatch > 0 && s.cfg.minibatch < N;
  try {
    r.initial_loss = certified_loss(s, cf);
    for (int l = 0; l < s.cfg.iterations; ++l) {
      std::vector<std::size_t> batch;
      if (sub) batch = rng.sample_without_replacement(N, s.cfg.minibatch);
      const FactorGradient g = pgd_gradient(s, cf, batch);
      std::vector<Eigen::MatrixXd> F, P;
      for (std::size_t k = 0; k < s.n_f(); ++k) F.push_back(s.F(cf, k) - s.cfg.alpha * g.F[k]);
      for (std::size_t j = 0; j < s.n_p(); ++j) P.push_back(s.P(cf, j) - s.cfg.alpha * g.P[j]);
      cf = pgd_project(s, F, P, &cf);
      detail::note_factors(r, cf);
      const double loss = certified_loss(s, cf);
      r.loss_trace.push_back(loss);
      r.certified_trace.push_back(loss);
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.cf = std::move(cf);
  return r;
}

}  // namespace sosil
