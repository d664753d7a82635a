#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sosil/learning.hpp"
#include "sosil/polynomial.hpp"
#include "sosil/sos.hpp"
#include "sosil/system.hpp"

namespace sosil {

/// V(x) = Zᵀ(x) P⁻¹(x̃) Z(x) for the closed loop u = F(x) P⁻¹(x̃) Z(x).
/// Holds a copy of the system.
struct LyapunovCertificate {
  SystemDef sys;
  PolyMatrix P, F;
  double eps1 = kDefaultEps1, eps2 = kDefaultEps2;
};

inline LyapunovCertificate make_certificate(const SystemDef& sys, const GramConstraintSet& g,
                                            const CertifiedFactors& cf) {
  return {sys, assemble_P(g, cf.values), assemble_F(g, cf.values), g.eps1, g.eps2};
}

/// Grid evidence for P(x̃) ⪰ ε₁I and S(x) ⪯ −ε₂I. `grid_only` is set when P
/// depends on the state, where the grid is the only evidence offered.
struct CertificateReport {
  double min_eig_P = std::numeric_limits<double>::infinity();
  double max_eig_S = -std::numeric_limits<double>::infinity();
  std::size_t points = 0;
  bool pass = false;
  bool grid_only = false;
};

/// Calls f(x) for every point of the uniform grid with `resolution` points per
/// axis on [−box, box]ⁿ, first coordinate varying slowest.
template <class Fn>
void for_each_grid_point(std::size_t n, double box, std::size_t resolution, Fn&& f) {
  if (resolution == 0 || n == 0) throw std::invalid_argument("grid: resolution and dimension must be positive");
  std::vector<std::size_t> idx(n, 0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  const double step = resolution > 1 ? 2.0 * box / static_cast<double>(resolution - 1) : 0.0;
  while (true) {
    for (std::size_t i = 0; i < n; ++i)
      x[static_cast<Eigen::Index>(i)] = resolution > 1 ? -box + step * static_cast<double>(idx[i]) : 0.0;
    f(x);
    std::size_t d = n;
    while (d > 0) {
      --d;
      if (++idx[d] < resolution) break;
      idx[d] = 0;
      if (d == 0) return;
    }
  }
}

inline CertificateReport check_certificate(const LyapunovCertificate& c, double box = 10.0,
                                           std::size_t resolution = 41, double tol = 1e-8) {
  CertificateReport r;
  r.grid_only = c.P.degree() > 0;
  for_each_grid_point(c.sys.n, box, resolution, [&](const Eigen::VectorXd& x) {
    const auto xs = as_span(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(c.P.eval(xs), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stability_matrix_at(c.sys, c.P, c.F, xs),
                                                      Eigen::EigenvaluesOnly);
    r.min_eig_P = std::min(r.min_eig_P, ep.eigenvalues().minCoeff());
    r.max_eig_S = std::max(r.max_eig_S, es.eigenvalues().maxCoeff());
    ++r.points;
  });
  r.pass = r.min_eig_P >= c.eps1 - tol && r.max_eig_S <= -c.eps2 + tol;
  return r;
}

inline Eigen::VectorXd lyapunov_weights(const LyapunovCertificate& c, std::span<const double> x) {
  const Eigen::MatrixXd P = c.P.eval(x);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(P);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
    throw std::domain_error("lyapunov: P is singular at x");
  return ldlt.solve(c.sys.eval_z(x));
}

inline double lyapunov_value(const LyapunovCertificate& c, std::span<const double> x) {
  return c.sys.eval_z(x).dot(lyapunov_weights(c, x));
}

/// V̇ = wᵀ S(x) w with w = P⁻¹(x̃) Z(x), S the stability matrix.
inline double lyapunov_rate(const LyapunovCertificate& c, std::span<const double> x) {
  const Eigen::VectorXd w = lyapunov_weights(c, x);
  return w.dot(stability_matrix_at(c.sys, c.P, c.F, x) * w);
}

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states, inputs;
  std::vector<double> v_values;  // empty unless a certificate was supplied
  bool diverged = false;
};

/// Closed-loop vector field [A(x) + B(x) K(x)] Z(x).
inline Eigen::VectorXd closed_loop_rate(const SystemDef& sys, const Controller& ctrl, std::span<const double> x) {
  const Eigen::VectorXd z = sys.eval_z(x);
  return sys.A.eval(x) * z + sys.B.eval(x) * (ctrl.gain(x) * z);
}

/// Classical RK4 with fixed step dt up to t_end. Every `record_every`-th step
/// is stored, along with the first and last. Stops early with `diverged` set
/// when ‖x‖ exceeds 1e9.
inline TrajectoryRecord simulate(const SystemDef& sys, const Controller& ctrl, const Eigen::VectorXd& x0,
                                 double t_end, double dt = 1e-3, std::size_t record_every = 1,
                                 const LyapunovCertificate* cert = nullptr) {
  if (!(dt > 0.0) || !(t_end >= dt)) throw std::invalid_argument("simulate: need dt > 0 and t_end >= dt");
  if (static_cast<std::size_t>(x0.size()) != sys.n) throw std::invalid_argument("simulate: x0 has wrong dimension");
  if (record_every == 0) record_every = 1;
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  TrajectoryRecord rec;
  auto record = [&](double t, const Eigen::VectorXd& x) {
    const auto xs = as_span(x);
    rec.times.push_back(t);
    rec.states.push_back(x);
    rec.inputs.push_back(ctrl.input(sys, xs));
    if (cert) rec.v_values.push_back(lyapunov_value(*cert, xs));
  };
  auto f = [&](const Eigen::VectorXd& x) { return closed_loop_rate(sys, ctrl, as_span(x)); };

  Eigen::VectorXd x = x0;
  record(0.0, x);
  for (std::size_t k = 1; k <= steps; ++k) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = static_cast<double>(k) * dt;
    if (!x.allFinite() || x.norm() > 1e9) {
      rec.diverged = true;
      rec.times.push_back(t);
      rec.states.push_back(x);
      return rec;
    }
    if (k % record_every == 0 || k == steps) record(t, x);
  }
  return rec;
}

/// (x₁, x₂, V) on the uniform grid over [−box, box]², x₁ varying slowest.
inline std::vector<Eigen::Vector3d> lyapunov_contour(const LyapunovCertificate& c, double box = 10.0,
                                                     std::size_t resolution = 41) {
  if (c.sys.n != 2) throw std::invalid_argument("lyapunov_contour: planar systems only");
  std::vector<Eigen::Vector3d> out;
  for_each_grid_point(2, box, resolution, [&](const Eigen::VectorXd& x) {
    out.emplace_back(x[0], x[1], lyapunov_value(c, as_span(x)));
  });
  return out;
}

/// `count` points evenly spaced along the boundary of [−box, box]²,
/// counter-clockwise from (box, 0).
inline std::vector<Eigen::VectorXd> boundary_seeds(double box = 10.0, std::size_t count = 16) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    const Eigen::Vector2d d(std::cos(angle), std::sin(angle));
    const Eigen::VectorXd p = box / d.cwiseAbs().maxCoeff() * d;
    out.push_back(p);
  }
  return out;
}

}  // namespace sosil
