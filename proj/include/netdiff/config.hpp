#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netdiff/bsar.hpp"
#include "netdiff/mc.hpp"
#include "netdiff/panel.hpp"
#include "netdiff/saom_fit.hpp"

namespace netdiff {

struct NetworkSpec {
  int n = 250;
  double avg_degree = 5.0;
};

struct SimulateSpec {
  double rho = 0.3;
  std::vector<double> beta{4.0, -2.0};  // intercept, slope
  double x_mean = 2.0;
  double x_sd = 2.0;
  ErrorDistribution errors = ErrorDistribution::normal;
};

/// Files a fit command reads. `data` is the CSV written by `simulate`.
struct FitInputSpec {
  std::string network;
  std::string data;
};

struct SaomSpec {
  FitConfig fit;
  std::vector<std::string> effects{"avSim", "effFrom:x"};
  bool center_covariates = true;
  double significance_level = 0.05;
};

struct PanelSpec {
  std::string outcome;
  std::string covariates;
  std::string proximity;
  PanelOptions options;
};

struct ReportSpec {
  std::string input;  // directory holding the summary CSVs; defaults to `out`
};

/// Everything a command needs. Loaded from one JSON document; absent keys
/// keep the defaults below and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 20190601;
  int workers = 0;  // 0: take NETDIFF_WORKERS, else 1
  std::string out = "out";
  bool record_timings = false;

  NetworkSpec network;
  SimulateSpec simulate;
  FitInputSpec input;
  GibbsConfig gibbs;
  SaomSpec saom;
  std::optional<PanelSpec> panel;  // fit-saom uses the panel when present
  ExperimentGrid grid;
  ReportSpec report;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// The Monte Carlo design with the run-wide settings folded in: master
/// seed, Gibbs and SAOM estimator configs, timings.
ExperimentGrid effective_grid(const RunConfig& cfg);

/// The fully resolved configuration (defaults included) as pretty JSON.
std::string resolved_json(const RunConfig& cfg);

/// FNV-1a of the resolved JSON minus the fields that cannot change results
/// (workers, out), as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// "config_hash=<hash> master_seed=<seed>" for artifact header lines.
std::string artifact_header(const RunConfig& cfg);

}  // namespace netdiff
