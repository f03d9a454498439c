#include "netdiff/saom_fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

#include "netdiff/error.hpp"
#include "netdiff/rng.hpp"

namespace netdiff {

namespace {

void check_binary(const BinaryVector& y, int n, const std::string& what) {
  if (static_cast<int>(y.size()) != n)
    throw InvalidArgument(what + " has length " + std::to_string(y.size()) + ", expected " + std::to_string(n));
  for (int v : y)
    if (v != 0 && v != 1) throw InvalidArgument(what + " must be 0/1");
}

void center_columns(std::vector<Eigen::MatrixXd>& mats) {
  if (mats.empty() || mats.front().cols() == 0) return;
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(mats.front().cols());
  Eigen::Index rows = 0;
  for (const auto& m : mats) {
    sum += m.colwise().sum();
    rows += m.rows();
  }
  if (rows == 0) return;
  const Eigen::RowVectorXd mean = sum / static_cast<double>(rows);
  for (auto& m : mats) m.rowwise() -= mean;
}

bool is_singular(const Eigen::MatrixXd& d) {
  if (!d.allFinite()) return true;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return true;
  return !(sv(0) > 0.0) || sv(sv.size() - 1) / sv(0) < 1e-10;
}

std::string describe(const Eigen::MatrixXd& d) {
  std::ostringstream s;
  s << "derivative matrix [";
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (i) s << "; ";
    for (Eigen::Index j = 0; j < d.cols(); ++j) s << (j ? " " : "") << d(i, j);
  }
  s << "]";
  return s.str();
}

}  // namespace

SaomProblem build_cross_sectional_problem(const Network& net, const BinaryVector& y, const Eigen::MatrixXd& X,
                                          std::vector<EffectSpec> effects, const ProblemOptions& options) {
  const int n = net.size();
  if (n < 3) throw InvalidArgument("cross-sectional problem needs at least 3 nodes (two anchors plus one free)");
  check_binary(y, n, "outcome");
  if (X.rows() != n && X.size() != 0) throw InvalidArgument("covariate rows do not match network size");
  std::erase_if(effects, [](const EffectSpec& e) { return e.kind == EffectKind::linear_shape; });
  if (effects.empty()) throw InvalidArgument("model has no effects");
  validate_effects(effects, X.cols());

  BinaryVector first = y;
  BinaryVector second = y;
  first[0] = 0;
  first[1] = 1;
  second[0] = 1;
  second[1] = 0;

  std::vector<Eigen::MatrixXd> cov{X, X};
  if (options.center_covariates) center_columns(cov);
  NeighbourWeights w(net);
  const double sim = mean_similarity(w, y);
  return SaomProblem{net, std::move(w), {std::move(first), std::move(second)}, std::move(cov), std::move(effects),
                     1.0, std::make_pair(0, 1), sim, true};
}

SaomProblem build_panel_problem(const Network& net, std::vector<BinaryVector> waves,
                                std::vector<Eigen::MatrixXd> covariates, std::vector<EffectSpec> effects,
                                const ProblemOptions& options) {
  const int n = net.size();
  if (waves.size() < 2) throw InvalidArgument("panel problem needs at least two waves");
  for (std::size_t t = 0; t < waves.size(); ++t) check_binary(waves[t], n, "wave " + std::to_string(t));
  if (covariates.size() == 1 && waves.size() > 1) covariates.resize(waves.size(), covariates.front());
  if (covariates.empty()) covariates.resize(waves.size(), Eigen::MatrixXd(n, 0));
  if (covariates.size() != waves.size()) throw InvalidArgument("need one covariate matrix per wave");
  for (const auto& c : covariates)
    if (c.rows() != n || c.cols() != covariates.front().cols())
      throw InvalidArgument("covariate matrices must all be n x k with the same k");
  if (effects.empty()) throw InvalidArgument("model has no effects");
  validate_effects(effects, covariates.front().cols());
  if (options.center_covariates) center_columns(covariates);

  NeighbourWeights w(net);
  double sim = 0.0;
  for (const auto& y : waves) sim += mean_similarity(w, y);
  sim /= static_cast<double>(waves.size());
  return SaomProblem{net, std::move(w), std::move(waves), std::move(covariates), std::move(effects),
                     1.0, std::nullopt, sim, true};
}

Eigen::VectorXd observed_statistics(const SaomProblem& problem) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.effects.size()));
  for (int t = 0; t < problem.periods(); ++t)
    s += target_statistics(problem.weights, problem.waves[static_cast<std::size_t>(t) + 1], problem.effects,
                           problem.covariates[static_cast<std::size_t>(t)], problem.mean_sim);
  return s;
}

Eigen::VectorXd simulated_statistics(const SaomProblem& problem, const ThetaVector& theta, std::uint64_t seed) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.effects.size()));
  for (int t = 0; t < problem.periods(); ++t) {
    const auto& x = problem.covariates[static_cast<std::size_t>(t)];
    const BehaviourState end =
        simulate_period(problem.weights, problem.waves[static_cast<std::size_t>(t)], problem.effects, theta,
                        problem.behaviour_rate, x, problem.mean_sim, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    s += target_statistics(problem.weights, end.y, problem.effects, x, problem.mean_sim);
  }
  return s;
}

void validate(const FitConfig& cfg) {
  if (cfg.phase1_reps < 0 || cfg.phase2_subphases < 1 || cfg.phase2_base_iterations < 0 || cfg.phase3_reps < 2 ||
      cfg.refresh_reps < 1)
    throw InvalidArgument("fit config: phase sizes must be positive (phase3_reps >= 2)");
  if (!(cfg.phase2_initial_gain > 0.0 && cfg.phase2_initial_gain <= 1.0))
    throw InvalidArgument("fit config: phase2_initial_gain must lie in (0, 1]");
  if (!(cfg.derivative_step > 0.0)) throw InvalidArgument("fit config: derivative_step must be positive");
  if (!(cfg.max_wall_seconds > 0.0)) throw InvalidArgument("fit config: max_wall_seconds must be positive");
  if (!(cfg.theta_bound > 0.0)) throw InvalidArgument("fit config: theta_bound must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

class Deadline {
 public:
  explicit Deadline(double seconds) : start_(Clock::now()), limit_(seconds) {}
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }
  bool passed() const { return elapsed() > limit_; }

 private:
  Clock::time_point start_;
  double limit_;
};

struct Aborted {
  std::string reason;
};

// Forward-difference derivative of E[S] with common random numbers: every arm
// of replication r reuses seed r. Also returns the mean of the base arm.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> crn_derivative(const SaomProblem& problem, const ThetaVector& theta,
                                                           int reps, double h, std::uint64_t seed, std::uint64_t phase,
                                                           const Deadline& deadline) {
  const auto p = theta.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd base_draws(reps, p);
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t s = derive_seed(seed, {phase, static_cast<std::uint64_t>(r)});
    const Eigen::VectorXd base = simulated_statistics(problem, theta, s);
    base_draws.row(r) = base.transpose();
    for (Eigen::Index l = 0; l < p; ++l) {
      ThetaVector shifted = theta;
      shifted(l) += h;
      d.col(l) += (simulated_statistics(problem, shifted, s) - base) / h;
    }
    if (deadline.passed()) throw Aborted{"wall-clock cap reached"};
  }
  d /= reps;
  return {d, base_draws};
}

}  // namespace

FitResult mom_estimate(const SaomProblem& problem, const FitConfig& cfg) {
  validate(cfg);
  const auto p = static_cast<Eigen::Index>(problem.effects.size());
  if (p == 0) throw InvalidArgument("model has no effects");
  if (problem.periods() < 1) throw InvalidArgument("problem needs at least two waves");

  const Deadline deadline(cfg.max_wall_seconds);
  FitResult result;
  for (const auto& e : problem.effects) result.effect_names.push_back(e.label);
  result.seed = cfg.seed;

  const Eigen::VectorXd observed = observed_statistics(problem);
  ThetaVector theta = ThetaVector::Zero(p);

  try {
    // Phase 1.
    double h = cfg.derivative_step;
    const int n1 = cfg.phase1_reps_for(static_cast<int>(p));
    auto [d, phase1_draws] = crn_derivative(problem, theta, n1, h, cfg.seed, 1, deadline);
    if (is_singular(d)) {
      h *= 2.0;
      std::tie(d, phase1_draws) = crn_derivative(problem, theta, n1, h, cfg.seed, 11, deadline);
      if (is_singular(d))
        throw NumericFailure("phase 1: singular " + describe(d) + " after doubling the step to " + std::to_string(h));
    }
    // Phase 1 closes with a Newton step from the mean of its base draws.
    const Eigen::VectorXd phase1_mean = phase1_draws.colwise().mean().transpose();
    theta -= d.inverse() * (phase1_mean - observed);
    if (!theta.allFinite() || theta.cwiseAbs().maxCoeff() > cfg.theta_bound)
      throw Aborted{"phase 1 step left |theta| > " + std::to_string(cfg.theta_bound)};

    // Phase 2. The derivative is refreshed at the start of every subphase;
    // a singular refresh keeps the previous one.
    double gain = cfg.phase2_initial_gain;
    for (int sub = 1; sub <= cfg.phase2_subphases; ++sub, gain *= 0.5) {
      Eigen::MatrixXd fresh = crn_derivative(problem, theta, std::max(n1, cfg.refresh_reps), h, derive_seed(cfg.seed, {4}),
                                             static_cast<std::uint64_t>(sub), deadline)
                                  .first;
      if (!is_singular(fresh) && (fresh.diagonal().array() > 0.0).all()) d = std::move(fresh);
      const Eigen::MatrixXd d_inv = d.inverse();
      const int iters = cfg.phase2_iterations(sub);
      ThetaVector running = ThetaVector::Zero(p);
      for (int it = 0; it < iters; ++it) {
        const std::uint64_t s =
            derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(sub), static_cast<std::uint64_t>(it)});
        const Eigen::VectorXd deviation = simulated_statistics(problem, theta, s) - observed;
        theta -= gain * (d_inv * deviation);
        if (!theta.allFinite() || theta.cwiseAbs().maxCoeff() > cfg.theta_bound)
          throw Aborted{"estimates diverged beyond |theta| > " + std::to_string(cfg.theta_bound)};
        running += theta;
        if (deadline.passed()) throw Aborted{"wall-clock cap reached"};
      }
      if (iters > 0) theta = running / iters;
    }

    // Phase 3.
    const int n3 = cfg.phase3_reps;
    auto [d3, draws] = crn_derivative(problem, theta, n3, cfg.derivative_step, cfg.seed, 3, deadline);
    const Eigen::RowVectorXd mean = draws.colwise().mean();
    const Eigen::MatrixXd centered = draws.rowwise() - mean;
    const Eigen::MatrixXd sigma = centered.transpose() * centered / (n3 - 1);

    result.t_conv.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      const double dev = mean(k) - observed(k);
      const double sd = std::sqrt(sigma(k, k));
      result.t_conv(k) = sd > 0.0 ? dev / sd : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    result.t_conv_max = result.t_conv.cwiseAbs().maxCoeff();

    const Eigen::MatrixXd& d_final = is_singular(d3) ? d : d3;
    const Eigen::MatrixXd d_final_inv = d_final.inverse();
    result.derivative = d_final;
    result.covariance = d_final_inv * sigma * d_final_inv.transpose();
    result.std_errors = result.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    result.theta_hat = theta;
    result.converged = true;
  } catch (const Aborted& abort) {
    result.theta_hat = theta;
    result.std_errors = Eigen::VectorXd::Zero(p);
    result.t_conv = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
    result.t_conv_max = std::numeric_limits<double>::infinity();
    result.converged = false;
    result.note = abort.reason;
  }
  result.wall_seconds = deadline.elapsed();
  return result;
}

bool convergence_filter(const FitResult& result, int spatial_index) {
  if (!result.converged) return false;
  if (!(result.t_conv_max <= 0.2)) return false;
  if (spatial_index >= 0) {
    if (spatial_index >= result.t_conv.size()) throw InvalidArgument("spatial index out of range");
    if (!(std::abs(result.t_conv(spatial_index)) <= 0.1)) return false;
  }
  return true;
}

std::vector<WaldTest> wald_significance(const FitResult& result, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("significance level must lie in (0, 1)");
  const double crit = normal_quantile(1.0 - level / 2.0);
  std::vector<WaldTest> out(static_cast<std::size_t>(result.theta_hat.size()));
  for (Eigen::Index k = 0; k < result.theta_hat.size(); ++k) {
    auto& w = out[static_cast<std::size_t>(k)];
    const double se = k < result.std_errors.size() ? result.std_errors(k) : 0.0;
    if (!(se > 0.0) || !std::isfinite(se)) continue;
    w.defined = true;
    w.z = result.theta_hat(k) / se;
    w.significant = std::abs(w.z) > crit;
  }
  return out;
}

void write_fit_csv_header(std::ostream& out, const std::vector<std::string>& effect_names) {
  out << "effects";
  for (const char* prefix : {"theta_", "se_", "t_"})
    for (const auto& name : effect_names) out << ',' << prefix << name;
  out << ",t_conv_max,converged,accepted,seconds,seed\n";
}

void write_fit_csv_row(std::ostream& out, const FitResult& result, bool accepted) {
  std::ostringstream row;
  row.precision(10);
  for (std::size_t k = 0; k < result.effect_names.size(); ++k) row << (k ? ";" : "") << result.effect_names[k];
  for (const Eigen::VectorXd* v : {&result.theta_hat, &result.std_errors, &result.t_conv})
    for (Eigen::Index k = 0; k < v->size(); ++k) row << ',' << (*v)(k);
  row << ',' << result.t_conv_max << ',' << (result.converged ? 1 : 0) << ',' << (accepted ? 1 : 0) << ',';
  if (std::isnan(result.wall_seconds)) row << "NA";
  else row << result.wall_seconds;
  row << ',' << result.seed << '\n';
  out << row.str();
}

}  // namespace netdiff
