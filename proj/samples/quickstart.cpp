// Learn a certified controller for the experiment-1 plant and simulate it.

#include <cstdio>

#include "sosil/builtin_systems.hpp"
#include "sosil/learning.hpp"
#include "sosil/verify.hpp"

int main() {
  using namespace sosil;
  const BuiltinExperiment e = nonlinear_system_experiment();
  const Dataset data = generate_data(e.sys, e.expert, 1000, 1.0, 10.0, 0);

  LearningConfig cfg;
  cfg.iterations = 10;
  const LearningSetup s = make_setup(e.sys, data, cfg);
  const RunResult r = run_admm(s);
  if (!r.ok) {
    std::fprintf(stderr, "admm failed: %s\n", r.error.c_str());
    return 1;
  }
  for (std::size_t l = 0; l < r.loss_trace.size(); ++l) std::printf("iteration %2zu  loss %.6f\n", l + 1, r.loss_trace[l]);

  const LyapunovCertificate cert = make_certificate(e.sys, s.gcs, r.cf);
  const CertificateReport rep = check_certificate(cert);
  std::printf("certificate %s: min eig P %.4g, max eig S %.4g\n", rep.pass ? "passes" : "fails", rep.min_eig_P,
              rep.max_eig_S);

  const Controller ctrl = extract_controller(s.gcs, r.cf);
  const Eigen::MatrixXd K = ctrl.symbolic()->coefficient(Exponent(2));
  std::printf("learned gain K = [%.4f, %.4f] (expert [-2, -10])\n", K(0, 0), K(0, 1));

  const TrajectoryRecord tr = simulate(e.sys, ctrl, Eigen::Vector2d(8.0, -6.0), 5.0, 1e-3, 1000, &cert);
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    std::printf("t %.1f  x (%+.5f, %+.5f)  V %.6g\n", tr.times[k], tr.states[k][0], tr.states[k][1], tr.v_values[k]);
  return rep.pass ? 0 : 1;
}
