#pragma once

// Experiment harness: configuration, seed sweeps, and the CSV artifacts.
//
// Config grammar, one entry per line:
//
//   line  := blank | "#" comment | key "=" value
//   list  := item ("," item)*      item := natural | natural "-" natural
//
// Keys and defaults are listed by write_config. Later sources override
// earlier ones: experiment defaults, then the config file, then flags.
//
// Output layout under output_dir:
//
//   config.txt                     resolved config and its hash
//   manifest.csv                   one row per run
//   loss_<algorithm>.csv           algorithm,N,seed,iteration,loss
//   runs/<alg>_N<N>_seed<s>/loss.csv           iteration,loss,certified_loss
//   runs/<alg>_N<N>_seed<s>/certificate.txt    eps, P and F as polymatrices
//   runs/<alg>_N<N>_seed<s>/contour.csv        x1,x2,V   (planar systems)
//   runs/<alg>_N<N>_seed<s>/trajectory_KK.csv  t,x1,..,xn,V
//
// Every number is printed as %.16e (17 significant digits), LF line endings.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sosil/builtin_systems.hpp"
#include "sosil/learning.hpp"
#include "sosil/lyapunov_sos.hpp"
#include "sosil/poly_io.hpp"
#include "sosil/verify.hpp"

namespace sosil {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string experiment = "nonlinear_system";
  std::string algorithm = "admm";
  std::string system_file;  // custom experiments only
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::size_t> n_samples{10, 100, 1000};
  int iterations = 50;
  double rho = 1.0;
  double alpha = 1e-5;
  double sigma = 1.0;
  double init_halfwidth = 5.0;
  double box = 10.0;
  unsigned d_K = 0, d_P = 0, d_F = 0;
  double eps1 = kDefaultEps1, eps2 = kDefaultEps2;
  std::size_t minibatch = 0;
  std::size_t grid_resolution = 41;
  std::size_t trajectories = 16;
  double t_end = 10.0;
  double dt = 1e-3;
  std::size_t record_every = 10;
  // Not part of the hash: they do not change any artifact.
  std::string output_dir = "sosil_out";
  unsigned jobs = 1;
};

inline std::string format_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": not a number: \"" + v + "\"");
  return out;
}

inline std::uint64_t parse_natural(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key + ": not a natural number: \"" + v + "\"");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": out of range: \"" + v + "\"");
  }
}

inline std::vector<std::uint64_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_natural(key, item));
      continue;
    }
    const std::uint64_t lo = parse_natural(key, trim(item.substr(0, dash)));
    const std::uint64_t hi = parse_natural(key, trim(item.substr(dash + 1)));
    if (hi < lo) throw ConfigError(key + ": empty range " + item);
    for (std::uint64_t k = lo; k <= hi; ++k) out.push_back(k);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

}  // namespace detail

/// Experiment-dependent defaults for ρ, α and the iteration budget. PGD gets
/// ten times the ADMM budget.
inline ExperimentConfig default_config(const std::string& experiment, const std::string& algorithm) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.algorithm = algorithm;
  int budget = 50;
  if (experiment == "nonlinear_control") {
    c.rho = 1000.0;
    c.alpha = 1e-8;
    c.d_F = 2;
    budget = 300;
  } else if (experiment != "nonlinear_system" && experiment != "custom") {
    throw ConfigError("experiment: unknown \"" + experiment + "\"");
  }
  if (algorithm == "pgd") budget *= 10;
  else if (algorithm != "admm") throw ConfigError("algorithm: unknown \"" + algorithm + "\"");
  c.iterations = budget;
  return c;
}

/// Reads `key = value` lines into a map. Duplicate and malformed lines throw.
inline std::map<std::string, std::string> read_config_entries(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": missing key");
    if (!out.emplace(key, detail::trim(t.substr(eq + 1))).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
  }
  return out;
}

/// Experiment defaults overlaid with `entries`. Unknown keys throw.
inline ExperimentConfig make_config(const std::map<std::string, std::string>& entries) {
  auto get = [&](const char* k, const char* fallback) {
    const auto it = entries.find(k);
    return it == entries.end() ? std::string(fallback) : it->second;
  };
  ExperimentConfig c = default_config(get("experiment", "nonlinear_system"), get("algorithm", "admm"));
  auto natural = [](const std::string& k, const std::string& v) { return detail::parse_natural(k, v); };
  auto small = [&](const std::string& k, const std::string& v) {
    const std::uint64_t x = natural(k, v);
    if (x > 1000000000ULL) throw ConfigError(k + ": too large");
    return x;
  };
  for (const auto& [k, v] : entries) {
    if (k == "experiment" || k == "algorithm") continue;
    if (k == "system_file") c.system_file = v;
    else if (k == "seeds") c.seeds = detail::parse_list(k, v);
    else if (k == "n_samples") {
      c.n_samples.clear();
      for (auto x : detail::parse_list(k, v)) c.n_samples.push_back(static_cast<std::size_t>(x));
    } else if (k == "iterations") c.iterations = static_cast<int>(small(k, v));
    else if (k == "rho") c.rho = detail::parse_real(k, v);
    else if (k == "alpha") c.alpha = detail::parse_real(k, v);
    else if (k == "sigma") c.sigma = detail::parse_real(k, v);
    else if (k == "init_halfwidth") c.init_halfwidth = detail::parse_real(k, v);
    else if (k == "box") c.box = detail::parse_real(k, v);
    else if (k == "d_K") c.d_K = static_cast<unsigned>(small(k, v));
    else if (k == "d_P") c.d_P = static_cast<unsigned>(small(k, v));
    else if (k == "d_F") c.d_F = static_cast<unsigned>(small(k, v));
    else if (k == "eps1") c.eps1 = detail::parse_real(k, v);
    else if (k == "eps2") c.eps2 = detail::parse_real(k, v);
    else if (k == "minibatch") c.minibatch = static_cast<std::size_t>(natural(k, v));
    else if (k == "grid_resolution") c.grid_resolution = static_cast<std::size_t>(small(k, v));
    else if (k == "trajectories") c.trajectories = static_cast<std::size_t>(small(k, v));
    else if (k == "t_end") c.t_end = detail::parse_real(k, v);
    else if (k == "dt") c.dt = detail::parse_real(k, v);
    else if (k == "record_every") c.record_every = static_cast<std::size_t>(small(k, v));
    else if (k == "output_dir") c.output_dir = v;
    else if (k == "jobs") c.jobs = static_cast<unsigned>(small(k, v));
    else throw ConfigError("unknown key \"" + k + "\"");
  }
  return c;
}

inline void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError("seeds: must be nonempty");
  if (c.n_samples.empty()) throw ConfigError("n_samples: must be nonempty");
  for (auto n : c.n_samples)
    if (n == 0) throw ConfigError("n_samples: entries must be positive");
  if (c.algorithm == "admm" && !(c.rho > 0.0)) throw ConfigError("rho: must be positive for admm");
  if (c.algorithm == "pgd" && !(c.alpha > 0.0)) throw ConfigError("alpha: must be positive for pgd");
  if (c.d_F < c.d_K + c.d_P) throw ConfigError("d_F: must be at least d_K + d_P");
  if (!(c.sigma >= 0.0)) throw ConfigError("sigma: must be nonnegative");
  if (!(c.init_halfwidth > 0.0) || !(c.box > 0.0)) throw ConfigError("init_halfwidth and box: must be positive");
  if (!(c.eps1 > 0.0) || !(c.eps2 > 0.0)) throw ConfigError("eps1 and eps2: must be positive");
  if (c.grid_resolution == 0) throw ConfigError("grid_resolution: must be positive");
  if (c.trajectories > 0 && (!(c.dt > 0.0) || !(c.t_end >= c.dt)))
    throw ConfigError("dt and t_end: need dt > 0 and t_end >= dt");
  if (c.experiment == "custom" && c.system_file.empty()) throw ConfigError("system_file: required for custom");
  if (c.jobs == 0) throw ConfigError("jobs: must be positive");
}

/// Canonical text of every key that influences the artifacts, sorted by key.
inline std::string write_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv{
      {"algorithm", c.algorithm},
      {"alpha", format_sci(c.alpha)},
      {"box", format_sci(c.box)},
      {"d_F", std::to_string(c.d_F)},
      {"d_K", std::to_string(c.d_K)},
      {"d_P", std::to_string(c.d_P)},
      {"dt", format_sci(c.dt)},
      {"eps1", format_sci(c.eps1)},
      {"eps2", format_sci(c.eps2)},
      {"experiment", c.experiment},
      {"grid_resolution", std::to_string(c.grid_resolution)},
      {"init_halfwidth", format_sci(c.init_halfwidth)},
      {"iterations", std::to_string(c.iterations)},
      {"minibatch", std::to_string(c.minibatch)},
      {"n_samples", detail::join(c.n_samples)},
      {"record_every", std::to_string(c.record_every)},
      {"rho", format_sci(c.rho)},
      {"seeds", detail::join(c.seeds)},
      {"sigma", format_sci(c.sigma)},
      {"system_file", c.system_file},
      {"t_end", format_sci(c.t_end)},
      {"trajectories", std::to_string(c.trajectories)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(write_config(c))));
  return buf;
}

/// System file for custom experiments:
///
///   nvars <n>
///   lyapunov_degree <d>              optional, default 2
///   A | B | Z | expert               each followed by a polymatrix block
///
/// Z is a p x 1 column. The expert is m x p. Learner degrees come from the
/// config, not from this file.
inline BuiltinExperiment read_system_file(std::istream& is) {
  BuiltinExperiment e;
  e.name = "custom";
  std::size_t nvars = 0;
  std::optional<PolyMatrix> A, B, Z, K;
  std::string line;
  while (std::getline(is, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string word;
    ls >> word;
    if (word == "nvars") {
      if (!(ls >> nvars) || nvars == 0) throw ParseError("system file: bad nvars");
      continue;
    }
    if (word == "lyapunov_degree") {
      if (!(ls >> e.expert_lyapunov_degree)) throw ParseError("system file: bad lyapunov_degree");
      continue;
    }
    if (nvars == 0) throw ParseError("system file: nvars must come first");
    std::optional<PolyMatrix>* slot = word == "A" ? &A : word == "B" ? &B : word == "Z" ? &Z : word == "expert" ? &K : nullptr;
    if (!slot) throw ParseError("system file: unexpected \"" + t + "\"");
    *slot = read_polymatrix(is, nvars);
  }
  if (!A || !B || !Z || !K) throw ParseError("system file: A, B, Z and expert are all required");
  if (Z->cols() != 1) throw ParseError("system file: Z must be a column");
  std::vector<Polynomial> z;
  for (std::size_t r = 0; r < Z->rows(); ++r) z.push_back(Z->entry(r, 0));
  e.sys = make_system(*A, *B, z);
  if (K->rows() != e.sys.m || K->cols() != e.sys.p) throw ParseError("system file: expert must be m x p");
  e.expert = *K;
  return e;
}

inline BuiltinExperiment load_experiment(const ExperimentConfig& c) {
  if (c.experiment == "nonlinear_system") return nonlinear_system_experiment();
  if (c.experiment == "nonlinear_control") return nonlinear_control_experiment();
  std::ifstream in(c.system_file);
  if (!in) throw ConfigError("system_file: cannot open " + c.system_file);
  return read_system_file(in);
}

inline void write_certificate(std::ostream& os, const LyapunovCertificate& c) {
  os << "eps1 " << format_sci(c.eps1) << "\neps2 " << format_sci(c.eps2) << "\nP\n";
  write_polymatrix(os, c.P);
  os << "F\n";
  write_polymatrix(os, c.F);
}

inline LyapunovCertificate read_certificate(std::istream& is, const SystemDef& sys) {
  LyapunovCertificate c{sys, PolyMatrix(), PolyMatrix()};
  std::string tag, line;
  if (!(is >> tag >> c.eps1) || tag != "eps1") throw ParseError("certificate: expected eps1");
  if (!(is >> tag >> c.eps2) || tag != "eps2") throw ParseError("certificate: expected eps2");
  std::getline(is, line);
  if (!std::getline(is, line) || line != "P") throw ParseError("certificate: expected P");
  c.P = read_polymatrix(is, sys.n);
  if (!std::getline(is, line) || line != "F") throw ParseError("certificate: expected F");
  c.F = read_polymatrix(is, sys.n);
  if (c.P.rows() != sys.p || c.P.cols() != sys.p || c.F.rows() != sys.m || c.F.cols() != sys.p)
    throw ParseError("certificate: shapes do not match the system");
  return c;
}

/// Status of one (seed, N) run as recorded in the manifest. `status` is
/// "ok", "aborted" (a subproblem threw) or "error" (the harness threw).
struct RunSummary {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t N = 0;
  std::string status = "error";
  std::string error;
  std::size_t iterations_done = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double final_certified_loss = std::numeric_limits<double>::quiet_NaN();
  double worst_residual = std::numeric_limits<double>::quiet_NaN();
  int uncertified_steps = 0;
  bool certificate_pass = false;
  bool certificate_reloaded = false;
  bool grid_only = false;
  double min_eig_P = std::numeric_limits<double>::quiet_NaN();
  double max_eig_S = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> loss_trace;  // initial loss first
};

inline std::string run_name(const std::string& algorithm, std::size_t N, std::uint64_t seed) {
  return algorithm + "_N" + std::to_string(N) + "_seed" + std::to_string(seed);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

inline std::string trajectory_name(std::size_t k) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "trajectory_%02zu.csv", k);
  return buf;
}

}  // namespace detail

/// Runs one (seed, N) pair and writes its artifacts into `dir`.
inline RunSummary run_single(const ExperimentConfig& c, const BuiltinExperiment& e, std::uint64_t seed,
                             std::size_t N, const std::filesystem::path& dir) {
  RunSummary out;
  out.name = run_name(c.algorithm, N, seed);
  out.seed = seed;
  out.N = N;
  std::filesystem::create_directories(dir);

  const Dataset data = generate_data(e.sys, e.expert, N, c.sigma, c.box, seed);
  LearningConfig lc;
  lc.d_K = c.d_K;
  lc.d_P = c.d_P;
  lc.d_F = c.d_F;
  lc.eps1 = c.eps1;
  lc.eps2 = c.eps2;
  lc.rho = c.rho;
  lc.alpha = c.alpha;
  lc.iterations = c.iterations;
  lc.init_halfwidth = c.init_halfwidth;
  lc.seed = seed;
  lc.minibatch = c.minibatch;
  const LearningSetup s = make_setup(e.sys, data, lc);

  RunResult r;
  double initial_certified = std::numeric_limits<double>::quiet_NaN();
  if (c.algorithm == "admm") {
    const AdmmState init = admm_initial_state(s);
    try {
      initial_certified = certified_loss(s, init.cf);
    } catch (const std::exception&) {
      // singular initial P: no certified loss at iteration 0
    }
    r = run_admm(s, &init);
  } else {
    r = run_pgd(s);
    initial_certified = r.initial_loss;
  }

  out.iterations_done = r.loss_trace.size();
  out.worst_residual = r.worst_residual;
  out.uncertified_steps = r.uncertified_steps;
  out.loss_trace.push_back(r.initial_loss);
  out.loss_trace.insert(out.loss_trace.end(), r.loss_trace.begin(), r.loss_trace.end());
  out.final_loss = out.loss_trace.back();
  out.final_certified_loss = r.certified_trace.empty() ? initial_certified : r.certified_trace.back();
  out.status = r.ok ? "ok" : "aborted";
  out.error = r.error;
  {
    auto os = detail::open_out(dir / "loss.csv");
    os << "iteration,loss,certified_loss\n";
    os << "0," << format_sci(r.initial_loss) << ',' << format_sci(initial_certified) << '\n';
    for (std::size_t l = 0; l < r.loss_trace.size(); ++l)
      os << l + 1 << ',' << format_sci(r.loss_trace[l]) << ',' << format_sci(r.certified_trace[l]) << '\n';
  }

  const LyapunovCertificate cert = make_certificate(e.sys, s.gcs, r.cf);
  {
    auto os = detail::open_out(dir / "certificate.txt");
    write_certificate(os, cert);
  }
  std::ifstream back(dir / "certificate.txt", std::ios::binary);
  const LyapunovCertificate reloaded = read_certificate(back, e.sys);
  const CertificateReport rep = check_certificate(reloaded, c.box, c.grid_resolution);
  out.certificate_reloaded = reloaded.P == cert.P && reloaded.F == cert.F;
  out.certificate_pass = rep.pass;
  out.grid_only = rep.grid_only;
  out.min_eig_P = rep.min_eig_P;
  out.max_eig_S = rep.max_eig_S;
  if (!rep.pass || e.sys.n != 2) return out;

  {
    auto os = detail::open_out(dir / "contour.csv");
    os << "x1,x2,V\n";
    for (const auto& row : lyapunov_contour(cert, c.box, c.grid_resolution))
      os << format_sci(row[0]) << ',' << format_sci(row[1]) << ',' << format_sci(row[2]) << '\n';
  }
  if (c.trajectories == 0) return out;
  const Controller ctrl = extract_controller(s.gcs, r.cf);
  const auto seeds = boundary_seeds(c.box, c.trajectories);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const TrajectoryRecord tr = simulate(e.sys, ctrl, seeds[k], c.t_end, c.dt, c.record_every, &cert);
    auto os = detail::open_out(dir / detail::trajectory_name(k));
    os << "t";
    for (std::size_t i = 0; i < e.sys.n; ++i) os << ",x" << i + 1;
    os << ",V\n";
    for (std::size_t j = 0; j < tr.v_values.size(); ++j) {
      os << format_sci(tr.times[j]);
      for (Eigen::Index i = 0; i < tr.states[j].size(); ++i) os << ',' << format_sci(tr.states[j][i]);
      os << ',' << format_sci(tr.v_values[j]) << '\n';
    }
  }
  return out;
}

/// Collects the per-run loss files into loss_<algorithm>.csv. Runs whose file
/// is missing or unreadable are skipped and returned.
inline std::vector<std::string> emit_figure_data(const ExperimentConfig& c) {
  const std::filesystem::path root(c.output_dir);
  std::vector<std::string> missing;
  auto os = detail::open_out(root / ("loss_" + c.algorithm + ".csv"));
  os << "algorithm,N,seed,iteration,loss\n";
  for (std::size_t N : c.n_samples)
    for (std::uint64_t seed : c.seeds) {
      const std::string name = run_name(c.algorithm, N, seed);
      std::ifstream in(root / "runs" / name / "loss.csv", std::ios::binary);
      std::string line;
      if (!in || !std::getline(in, line)) {
        missing.push_back(name);
        continue;
      }
      while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        os << c.algorithm << ',' << N << ',' << seed << ',' << line.substr(0, a) << ',' << line.substr(a + 1, b - a - 1)
           << '\n';
      }
    }
  return missing;
}

struct ExperimentOutcome {
  std::vector<RunSummary> runs;
  std::vector<std::string> missing;
  bool any_aborted = false;
};

/// Validates `c`, checks the expert, runs the sweep on `c.jobs` threads and
/// writes every artifact. `progress` (may be null) is called once per
/// finished run, serialized.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c,
                                        const std::function<void(const RunSummary&)>& progress = {}) {
  validate(c);
  const BuiltinExperiment e = load_experiment(c);
  check_expert(e);
  const std::filesystem::path root(c.output_dir);
  std::filesystem::create_directories(root / "runs");
  {
    auto os = detail::open_out(root / "config.txt");
    os << write_config(c) << "config_hash = " << config_hash(c) << '\n';
  }

  std::vector<std::pair<std::size_t, std::uint64_t>> work;
  for (std::size_t N : c.n_samples)
    for (std::uint64_t seed : c.seeds) work.emplace_back(N, seed);
  ExperimentOutcome out;
  out.runs.resize(work.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      const auto [N, seed] = work[i];
      RunSummary r;
      r.name = run_name(c.algorithm, N, seed);
      r.N = N;
      r.seed = seed;
      try {
        r = run_single(c, e, seed, N, root / "runs" / r.name);
      } catch (const std::exception& ex) {
        r.status = "error";
        r.error = ex.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      out.runs[i] = std::move(r);
      if (progress) progress(out.runs[i]);
    }
  };
  std::vector<std::thread> pool;
  const unsigned n_threads = std::min<unsigned>(c.jobs, static_cast<unsigned>(work.size()));
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const std::string hash = config_hash(c);
  auto os = detail::open_out(root / "manifest.csv");
  os << "config_hash,run,algorithm,N,seed,status,iterations,final_loss,final_certified_loss,worst_residual,"
        "uncertified_steps,certificate,grid_only,min_eig_P,max_eig_S,error\n";
  for (const auto& r : out.runs) {
    if (r.status != "ok") out.any_aborted = true;
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << hash << ',' << r.name << ',' << c.algorithm << ',' << r.N << ',' << r.seed << ',' << r.status << ','
       << r.iterations_done << ',' << format_sci(r.final_loss) << ',' << format_sci(r.final_certified_loss) << ','
       << format_sci(r.worst_residual) << ',' << r.uncertified_steps << ','
       << (r.certificate_pass && r.certificate_reloaded ? "pass" : "fail") << ',' << (r.grid_only ? 1 : 0) << ','
       << format_sci(r.min_eig_P) << ',' << format_sci(r.max_eig_S) << ',' << err << '\n';
  }
  out.missing = emit_figure_data(c);
  return out;
}

}  // namespace sosil
