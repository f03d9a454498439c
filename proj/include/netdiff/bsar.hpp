#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netdiff/net.hpp"
#include "netdiff/rng.hpp"

namespace netdiff {

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/// Distribution of the structural error. `normal` gives the spatial probit,
/// `logistic` (standard logistic, scale 1) the spatial logit.
enum class ErrorDistribution { normal, logistic };

std::string to_string(ErrorDistribution d);
ErrorDistribution parse_error_distribution(const std::string& name);

struct BsarParams {
  double rho = 0.0;
  Eigen::VectorXd beta;  // includes the intercept when X carries a ones column
  double error_sd = 1.0;
  ErrorDistribution errors = ErrorDistribution::normal;
};

struct LatentDraw {
  Eigen::VectorXd y_star;
  BinaryVector y;  // y[i] == 1 exactly when y_star[i] > 0
  Eigen::VectorXd epsilon;
};

/// Draws epsilon and solves (I - rho W) y* = X beta + epsilon.
LatentDraw simulate_bsar(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BsarParams& params,
                         std::uint64_t seed);
LatentDraw simulate_bsar(const Network& net, const Eigen::MatrixXd& X, const BsarParams& params,
                         std::uint64_t seed);

/// Same as simulate_bsar with a caller-supplied error vector.
LatentDraw solve_bsar(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, double rho,
                      const Eigen::VectorXd& beta, Eigen::VectorXd epsilon);

// ---------------------------------------------------------------------------
// Truncated normal
// ---------------------------------------------------------------------------

/// Draw from N(mean, sd^2) restricted to (0, inf) when `positive`, else to
/// (-inf, 0]. Inverse-CDF method on the tail-stable side, with the
/// standardized truncation point clamped to [-8, 8].
double draw_truncated_normal(double mean, double sd, bool positive, Rng& rng);

// ---------------------------------------------------------------------------
// Bayesian spatial probit
// ---------------------------------------------------------------------------

/// Which matrix the sampler uses as the spatial lag operator.
enum class GibbsWeights {
  row_normalized,  // the network's row-normalized W
  binary,          // the raw 0/1 adjacency
};

std::string to_string(GibbsWeights w);
GibbsWeights parse_gibbs_weights(const std::string& name);

struct GibbsConfig {
  int n_iter = 4000;
  int burn_in = 400;
  int rho_grid_size = 200;
  double prior_beta_variance = 1e6;
  double grid_margin = 1e-3;  // distance kept from the admissible endpoints
  double significance_level = 0.05;
  GibbsWeights weights = GibbsWeights::row_normalized;
  std::uint64_t seed = 0;
};

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double z = 0.0;
  bool significant = false;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;  // rho first, then beta in column order
  double rho_lower = 0.0;
  double rho_upper = 0.0;
  double boundary_fraction = 0.0;  // share of rho draws in an end grid cell
  bool boundary_warning = false;   // boundary_fraction > 0.5
  int draws = 0;

  const ParameterSummary& rho() const { return parameters.front(); }
  const ParameterSummary& beta(int j) const { return parameters.at(static_cast<std::size_t>(j) + 1); }
};

/// Three-block Gibbs sampler for y* = rho W y* + X beta + eps, eps ~ N(0, I):
/// latent utilities from univariate truncated normals, beta from its
/// conjugate normal conditional, rho by griddy Gibbs with cached log
/// determinants. `names` labels the beta columns (defaults beta0, beta1, ...).
PosteriorSummary gibbs_fit(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BinaryVector& y,
                           const GibbsConfig& cfg, const std::vector<std::string>& names = {});
PosteriorSummary gibbs_fit(const Network& net, const Eigen::MatrixXd& X, const BinaryVector& y,
                           const GibbsConfig& cfg, const std::vector<std::string>& names = {});

/// Optional hook that receives every retained rho draw (tests only).
struct GibbsTrace {
  std::vector<double> rho;
};
PosteriorSummary gibbs_fit_traced(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BinaryVector& y,
                                  const GibbsConfig& cfg, GibbsTrace& trace);

// ---------------------------------------------------------------------------
// Plain probit
// ---------------------------------------------------------------------------

struct ProbitFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd std_errors;
  double log_likelihood = 0.0;
  int iterations = 0;
};

/// Maximum-likelihood probit by Newton iterations on the observed
/// information; stops when the gradient max-norm drops below 1e-8.
ProbitFit probit_fit(const Eigen::MatrixXd& X, const BinaryVector& y);

/// phi(t) / Phi(t), stable in both tails.
double inverse_mills(double t);

}  // namespace netdiff
