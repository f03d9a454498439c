#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netdiff/net.hpp"
#include "netdiff/saom.hpp"

namespace netdiff {

/// A behaviour-only estimation problem. Every tie is structural: the network
/// is identical in all waves and never simulated.
struct SaomProblem {
  Network network;
  NeighbourWeights weights;
  std::vector<BinaryVector> waves;
  std::vector<Eigen::MatrixXd> covariates;  // one per wave; period t uses covariates[t]
  std::vector<EffectSpec> effects;
  double behaviour_rate = 1.0;
  std::optional<std::pair<int, int>> anchor_pair;
  double mean_sim = 0.0;
  bool ties_structural = true;

  int size() const { return network.size(); }
  int periods() const { return static_cast<int>(waves.size()) - 1; }
};

struct ProblemOptions {
  // Subtract the overall column mean from every covariate before use.
  bool center_covariates = true;
};

/// Two "fake" waves built from one cross-section: both equal y except that
/// nodes 0 and 1 carry the mirrored pattern (0 -> 1 and 1 -> 0). linearShape
/// is dropped, the rate is fixed at 1 and mean_sim comes from y.
SaomProblem build_cross_sectional_problem(const Network& net, const BinaryVector& y, const Eigen::MatrixXd& X,
                                          std::vector<EffectSpec> effects, const ProblemOptions& options = {});

/// Multi-wave panel with per-wave covariates (or a single matrix used for
/// every wave). Per-period rates are fixed at 1.
SaomProblem build_panel_problem(const Network& net, std::vector<BinaryVector> waves,
                                std::vector<Eigen::MatrixXd> covariates, std::vector<EffectSpec> effects,
                                const ProblemOptions& options = {});

/// Observed target statistics summed over periods (end-of-period waves).
Eigen::VectorXd observed_statistics(const SaomProblem& problem);

/// Simulated target statistics summed over periods, every period starting
/// from its observed wave.
Eigen::VectorXd simulated_statistics(const SaomProblem& problem, const ThetaVector& theta, std::uint64_t seed);

struct FitConfig {
  int phase1_reps = 0;  // 0 means 7 + 3p
  int phase2_subphases = 4;
  double phase2_initial_gain = 0.2;
  int phase2_base_iterations = 50;  // subphase k runs base + 50 k updates
  int phase3_reps = 1000;
  int refresh_reps = 50;  // derivative re-estimate at the start of each phase 2 subphase (at least phase1 reps)
  double derivative_step = 0.1;
  double theta_bound = 50.0;  // |theta_k| beyond this during phase 2 aborts as diverged
  double max_wall_seconds = 3600.0;
  std::uint64_t seed = 0;

  int phase1_reps_for(int parameters) const { return phase1_reps > 0 ? phase1_reps : 7 + 3 * parameters; }
  int phase2_iterations(int subphase) const { return phase2_base_iterations + 50 * subphase; }
};

void validate(const FitConfig& cfg);

struct FitResult {
  std::vector<std::string> effect_names;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_conv;
  double t_conv_max = 0.0;
  bool converged = false;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string note;             // why the fit is unconverged, empty otherwise
  Eigen::MatrixXd derivative;   // dE[S]/dtheta at theta_hat
  Eigen::MatrixXd covariance;   // of theta_hat
};

/// Method-of-moments fit by Robbins-Monro stochastic approximation.
///   Phase 1: derivative matrix at theta = 0 by forward differences with
///            common random numbers, then one Newton step.
///   Phase 2: theta <- theta - a D^-1 (S_sim - S_obs), gain halved per
///            subphase, each subphase restarting from its running average
///            with D re-estimated at that point.
///   Phase 3: convergence t-ratios and standard errors at theta_hat.
/// Exceeding the wall cap or theta_bound yields converged = false.
FitResult mom_estimate(const SaomProblem& problem, const FitConfig& cfg);

/// Keep a fit when it converged, its largest |t| is at most 0.2 and the
/// spatial effect's |t| is at most 0.1 (spatial_index < 0 skips that rule).
bool convergence_filter(const FitResult& result, int spatial_index);

struct WaldTest {
  double z = 0.0;
  bool significant = false;
  bool defined = false;  // false when the standard error is zero or missing
};

std::vector<WaldTest> wald_significance(const FitResult& result, double level);

void write_fit_csv_header(std::ostream& out, const std::vector<std::string>& effect_names);
void write_fit_csv_row(std::ostream& out, const FitResult& result, bool accepted);

}  // namespace netdiff
