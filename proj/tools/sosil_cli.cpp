// sosil: run imitation-learning sweeps and check certificate files.
//
//   sosil run [--config FILE] [--experiment E] [--algorithm A] [--seeds 0-9]
//             [--n-samples 10,100,1000] [--iterations K] [--rho R] [--alpha A]
//             [--out DIR] [--jobs J] [--set key=value]...
//   sosil check --experiment E [--system-file F] CERTIFICATE
//
// The output directory defaults to $SOSIL_OUTPUT_DIR, then "sosil_out".

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sosil/experiment.hpp"

namespace {

int run_command(const std::string& config_file, const std::map<std::string, std::string>& flags,
                const std::vector<std::string>& sets) {
  std::map<std::string, std::string> entries;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw sosil::ConfigError("cannot open " + config_file);
    entries = sosil::read_config_entries(in);
  }
  if (!entries.count("output_dir"))
    if (const char* env = std::getenv("SOSIL_OUTPUT_DIR"); env && *env) entries["output_dir"] = env;
  if (!entries.count("jobs")) entries["jobs"] = std::to_string(std::max(1u, std::thread::hardware_concurrency()));
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw sosil::ConfigError("--set expects key=value, got \"" + s + "\"");
    entries[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [k, v] : flags) entries[k] = v;

  const sosil::ExperimentConfig cfg = sosil::make_config(entries);
  std::fprintf(stderr, "sosil: %s/%s, %zu runs, %d iterations each, output %s (config %s)\n", cfg.experiment.c_str(),
               cfg.algorithm.c_str(), cfg.seeds.size() * cfg.n_samples.size(), cfg.iterations,
               cfg.output_dir.c_str(), sosil::config_hash(cfg).c_str());
  const auto outcome = sosil::run_experiment(cfg, [](const sosil::RunSummary& r) {
    std::fprintf(stderr, "  %-28s %-7s loss %.6g  certified %.6g  certificate %s%s%s\n", r.name.c_str(),
                 r.status.c_str(), r.final_loss, r.final_certified_loss,
                 r.certificate_pass && r.certificate_reloaded ? "pass" : "fail", r.error.empty() ? "" : "  ",
                 r.error.c_str());
  });
  for (const auto& m : outcome.missing) std::fprintf(stderr, "sosil: missing loss trace for %s\n", m.c_str());
  return outcome.any_aborted ? 1 : 0;
}

int check_command(const std::string& experiment, const std::string& system_file, const std::string& path) {
  sosil::ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.system_file = system_file;
  const sosil::BuiltinExperiment e = sosil::load_experiment(cfg);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const sosil::CertificateReport r = sosil::check_certificate(sosil::read_certificate(in, e.sys));
  std::printf("min_eig_P %.6g\nmax_eig_S %.6g\npoints %zu\n%s%s\n", r.min_eig_P, r.max_eig_S, r.points,
              r.pass ? "PASS" : "FAIL", r.grid_only ? " (grid only)" : "");
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stable imitation learning with sum-of-squares certificates"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a seed sweep and write its artifacts");
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  run->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  const std::vector<std::pair<std::string, std::string>> options{
      {"--experiment", "experiment"}, {"--algorithm", "algorithm"}, {"--seeds", "seeds"},
      {"--n-samples", "n_samples"},   {"--iterations", "iterations"}, {"--rho", "rho"},
      {"--alpha", "alpha"},           {"--out", "output_dir"},        {"--jobs", "jobs"},
      {"--system-file", "system_file"}};
  for (const auto& [flag, key] : options)
    run->add_option_function<std::string>(flag, [&flags, key = key](const std::string& v) { flags[key] = v; },
                                          "overrides " + key);
  run->add_option("--set", sets, "any config key, as key=value");

  auto* check = app.add_subcommand("check", "Re-verify a certificate file on the default grid");
  std::string experiment = "nonlinear_system", system_file, cert_path;
  check->add_option("--experiment", experiment, "nonlinear_system, nonlinear_control or custom");
  check->add_option("--system-file", system_file, "system definition for custom");
  check->add_option("certificate", cert_path, "certificate.txt from a run")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(config_file, flags, sets);
    return check_command(experiment, system_file, cert_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sosil: %s\n", e.what());
    return 2;
  }
}
