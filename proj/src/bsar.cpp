#include "netdiff/bsar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Sparse>

#include "netdiff/error.hpp"

namespace netdiff {

namespace {

// Uniform on the open interval (0, 1).
double open_unit(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

void check_binary(const BinaryVector& y, Eigen::Index n) {
  if (static_cast<Eigen::Index>(y.size()) != n) throw InvalidArgument("outcome length does not match design rows");
  int ones = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw InvalidArgument("outcome must be 0/1");
    ones += v;
  }
  if (ones == 0 || ones == static_cast<int>(y.size()))
    throw DegenerateData("outcome has a single class (" + std::to_string(ones) + " ones of " +
                         std::to_string(y.size()) + ")");
}

}  // namespace

std::string to_string(ErrorDistribution d) { return d == ErrorDistribution::normal ? "normal" : "logistic"; }

ErrorDistribution parse_error_distribution(const std::string& name) {
  if (name == "normal") return ErrorDistribution::normal;
  if (name == "logistic") return ErrorDistribution::logistic;
  throw InvalidArgument("unknown error distribution '" + name + "' (expected normal|logistic)");
}

std::string to_string(GibbsWeights w) { return w == GibbsWeights::row_normalized ? "row_normalized" : "binary"; }

GibbsWeights parse_gibbs_weights(const std::string& name) {
  if (name == "row_normalized") return GibbsWeights::row_normalized;
  if (name == "binary") return GibbsWeights::binary;
  throw InvalidArgument("unknown gibbs weights '" + name + "' (expected row_normalized|binary)");
}

LatentDraw solve_bsar(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, double rho,
                      const Eigen::VectorXd& beta, Eigen::VectorXd epsilon) {
  const Eigen::Index n = weights.rows();
  if (weights.cols() != n) throw InvalidArgument("weights must be square");
  if (X.rows() != n) throw InvalidArgument("design matrix rows do not match network size");
  if (X.cols() != beta.size()) throw InvalidArgument("beta length does not match design columns");
  if (epsilon.size() != n) throw InvalidArgument("error vector length does not match network size");

  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * weights;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  if (n > 0 && !(lu.rcond() > 1e-12)) {
    const Eigen::VectorXd ev = real_spectrum(weights);
    double worst = ev.size() ? ev(0) : 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k)
      if (std::abs(1.0 - rho * ev(k)) < std::abs(1.0 - rho * worst)) worst = ev(k);
    std::ostringstream msg;
    msg << "I - rho W is singular at rho=" << rho << " (eigenvalue " << worst << ")";
    throw NumericFailure(msg.str());
  }
  LatentDraw out;
  out.y_star = lu.solve(X * beta + epsilon);
  out.epsilon = std::move(epsilon);
  out.y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out.y[static_cast<std::size_t>(i)] = out.y_star(i) > 0.0 ? 1 : 0;
  return out;
}

LatentDraw simulate_bsar(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BsarParams& params,
                         std::uint64_t seed) {
  if (!(params.error_sd > 0.0)) throw InvalidArgument("error_sd must be positive");
  Rng rng(seed);
  Eigen::VectorXd eps(weights.rows());
  if (params.errors == ErrorDistribution::normal) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = params.error_sd * normal(rng);
  } else {
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
      const double u = open_unit(rng);
      eps(i) = params.error_sd * std::log(u / (1.0 - u));
    }
  }
  return solve_bsar(weights, X, params.rho, params.beta, std::move(eps));
}

LatentDraw simulate_bsar(const Network& net, const Eigen::MatrixXd& X, const BsarParams& params,
                         std::uint64_t seed) {
  return simulate_bsar(net.weights(), X, params, seed);
}

double draw_truncated_normal(double mean, double sd, bool positive, Rng& rng) {
  // Work with a standard normal restricted to (a, inf). For the (-inf, 0]
  // side, reflect: -Z restricted to (-b, inf).
  const double bound = positive ? -mean / sd : mean / sd;
  const double a = std::clamp(bound, -8.0, 8.0);
  // X > a  <=>  -X < -a, and -X = Phi^-1(U * Phi(-a)) stays accurate in the
  // upper tail where Phi(a) rounds to 1.
  double z = -normal_quantile(open_unit(rng) * normal_cdf(-a));
  z = std::max(z, bound);
  return positive ? mean + sd * z : mean - sd * z;
}

// ---------------------------------------------------------------------------

namespace {

struct RhoGrid {
  std::vector<double> rho;
  std::vector<double> log_det;
};

RhoGrid make_rho_grid(const Eigen::VectorXd& eigenvalues, int size, double margin, double& lower,
                      double& upper) {
  const double lmin = eigenvalues.size() ? eigenvalues.minCoeff() : 0.0;
  const double lmax = eigenvalues.size() ? eigenvalues.maxCoeff() : 0.0;
  lower = lmin < -1e-12 ? 1.0 / lmin : -1.0;
  upper = lmax > 1e-12 ? 1.0 / lmax : 1.0;
  const double lo = lower + margin;
  const double hi = upper - margin;
  if (!(hi > lo)) throw NumericFailure("admissible rho interval is empty");
  RhoGrid g;
  g.rho.resize(static_cast<std::size_t>(size));
  g.log_det.resize(static_cast<std::size_t>(size));
  for (int s = 0; s < size; ++s) {
    const double r = size == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * s / (size - 1);
    double ld = 0.0;
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) ld += std::log(std::abs(1.0 - r * eigenvalues(k)));
    g.rho[static_cast<std::size_t>(s)] = r;
    g.log_det[static_cast<std::size_t>(s)] = ld;
  }
  return g;
}

// Draw rho from the density whose values at the grid nodes are given
// (unnormalized, in log space) and that is linear between nodes. Returns the
// draw and the index of the grid cell it fell in.
std::pair<double, std::size_t> draw_from_grid(const std::vector<double>& rho, const std::vector<double>& log_dens,
                                              Rng& rng) {
  const std::size_t g = rho.size();
  if (g == 1) return {rho[0], 0};
  const double top = *std::max_element(log_dens.begin(), log_dens.end());
  std::vector<double> p(g);
  for (std::size_t s = 0; s < g; ++s) p[s] = std::exp(log_dens[s] - top);
  std::vector<double> cum(g - 1);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < g; ++s) {
    total += 0.5 * (p[s] + p[s + 1]) * (rho[s + 1] - rho[s]);
    cum[s] = total;
  }
  const double u = open_unit(rng) * total;
  const std::size_t cell = std::min<std::size_t>(
      static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin()), g - 2);
  const double before = cell == 0 ? 0.0 : cum[cell - 1];
  const double width = rho[cell + 1] - rho[cell];
  const double pa = p[cell];
  const double pb = p[cell + 1];
  // Mass to cover inside the cell, in units of the cell width.
  const double m = std::clamp((u - before) / width, 0.0, 0.5 * (pa + pb));
  // Solve pa t + (pb - pa) t^2 / 2 = m for t in [0, 1], in the form that
  // stays stable when pa and pb are close.
  const double root = std::sqrt(std::max(0.0, pa * pa + 2.0 * (pb - pa) * m));
  double t = pa + root > 0.0 ? 2.0 * m / (pa + root) : 0.5;
  t = std::clamp(t, 0.0, 1.0);
  return {rho[cell] + t * width, cell};
}

PosteriorSummary run_gibbs(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BinaryVector& y,
                           const GibbsConfig& cfg, const std::vector<std::string>& names, GibbsTrace* trace) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (weights.rows() != n || weights.cols() != n) throw InvalidArgument("weights do not match design rows");
  if (k < 1) throw InvalidArgument("design matrix needs at least one column");
  if (cfg.n_iter < 1 || cfg.burn_in < 0 || cfg.burn_in >= cfg.n_iter)
    throw InvalidArgument("gibbs config requires 0 <= burn_in < n_iter");
  if (cfg.rho_grid_size < 2) throw InvalidArgument("rho grid needs at least two points");
  if (!(cfg.prior_beta_variance > 0.0)) throw InvalidArgument("prior variance must be positive");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != k)
    throw InvalidArgument("one name per design column required");
  check_binary(y, n);

  PosteriorSummary out;
  const RhoGrid grid =
      make_rho_grid(real_spectrum(weights), cfg.rho_grid_size, cfg.grid_margin, out.rho_lower, out.rho_upper);

  using Sparse = Eigen::SparseMatrix<double>;
  const Sparse w = weights.sparseView();
  const Sparse wt = w.transpose();
  const Sparse w_sym = w + wt;
  const Sparse wtw = (wt * w).pruned();

  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd post_prec =
      xtx + Eigen::MatrixXd::Identity(k, k) / cfg.prior_beta_variance;
  const Eigen::LLT<Eigen::MatrixXd> post_chol(post_prec);
  if (post_chol.info() != Eigen::Success) throw NumericFailure("X'X + prior precision is not positive definite");

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = y[static_cast<std::size_t>(i)] ? 0.5 : -0.5;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double rho = std::clamp(0.0, grid.rho.front(), grid.rho.back());

  const int kept = cfg.n_iter - cfg.burn_in;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(k + 1);
  // Shift by the first retained draw to keep the variance accumulation stable.
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(k + 1);
  int boundary_hits = 0;
  if (trace) trace->rho.reserve(static_cast<std::size_t>(kept));

  std::vector<double> log_dens(grid.rho.size());
  for (int iter = 0; iter < cfg.n_iter; ++iter) {
    // (1) latent utilities. Precision H = (I - rho W)'(I - rho W); the
    // conditional of z_i has precision H_ii and mean (b_i - sum_{j!=i} H_ij z_j) / H_ii
    // with b = (I - rho W)' X beta.
    const Eigen::VectorXd xb = X * beta;
    const Eigen::VectorXd b = xb - rho * (wt * xb);
    const double rho2 = rho * rho;
    for (Eigen::Index i = 0; i < n; ++i) {
      double off = 0.0;  // sum_{j != i} H_ij z_j
      double h_ii = 1.0;
      for (Sparse::InnerIterator it(w_sym, i); it; ++it) {
        if (it.row() == i) h_ii -= rho * it.value();
        else off -= rho * it.value() * z(it.row());
      }
      for (Sparse::InnerIterator it(wtw, i); it; ++it) {
        if (it.row() == i) h_ii += rho2 * it.value();
        else off += rho2 * it.value() * z(it.row());
      }
      const double mean = (b(i) - off) / h_ii;
      z(i) = draw_truncated_normal(mean, 1.0 / std::sqrt(h_ii), y[static_cast<std::size_t>(i)] == 1, rng);
    }

    // (2) beta | z, rho: regression of (I - rho W) z on X.
    const Eigen::VectorXd wz = w * z;
    const Eigen::VectorXd az = z - rho * wz;
    const Eigen::VectorXd mean_beta = post_chol.solve(X.transpose() * az);
    // beta = mean + L^-T e where the posterior precision is L L'.
    Eigen::VectorXd e(k);
    for (Eigen::Index j = 0; j < k; ++j) e(j) = normal(rng);
    beta = mean_beta + post_chol.matrixU().solve(e);

    // (3) rho | z, beta on the grid: log|I - rho W| - ||(z - X beta) - rho W z||^2 / 2.
    const Eigen::VectorXd e0 = z - X * beta;
    const double ee = e0.squaredNorm();
    const double ew = e0.dot(wz);
    const double ww = wz.squaredNorm();
    for (std::size_t s = 0; s < grid.rho.size(); ++s) {
      const double r = grid.rho[s];
      log_dens[s] = grid.log_det[s] - 0.5 * (ee - 2.0 * r * ew + r * r * ww);
    }
    const auto [draw, cell] = draw_from_grid(grid.rho, log_dens, rng);
    rho = draw;

    if (iter >= cfg.burn_in) {
      Eigen::VectorXd v(k + 1);
      v(0) = rho;
      v.tail(k) = beta;
      if (iter == cfg.burn_in) shift = v;
      sum += v - shift;
      sum_sq += (v - shift).cwiseAbs2();
      if (cell == 0 || cell + 2 == grid.rho.size()) ++boundary_hits;
      if (trace) trace->rho.push_back(rho);
    }
  }

  out.draws = kept;
  out.boundary_fraction = static_cast<double>(boundary_hits) / kept;
  out.boundary_warning = out.boundary_fraction > 0.5;
  const double crit = normal_quantile(1.0 - cfg.significance_level / 2.0);
  for (Eigen::Index p = 0; p <= k; ++p) {
    ParameterSummary s;
    s.name = p == 0 ? "rho" : (names.empty() ? "beta" + std::to_string(p - 1) : names[static_cast<std::size_t>(p - 1)]);
    const double m = sum(p) / kept;
    s.mean = shift(p) + m;
    const double var = kept > 1 ? std::max(0.0, (sum_sq(p) - kept * m * m) / (kept - 1)) : 0.0;
    s.sd = std::sqrt(var);
    s.z = s.sd > 0.0 ? s.mean / s.sd : 0.0;
    s.significant = s.sd > 0.0 && std::abs(s.z) > crit;
    out.parameters.push_back(std::move(s));
  }
  return out;
}

}  // namespace

PosteriorSummary gibbs_fit(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BinaryVector& y,
                           const GibbsConfig& cfg, const std::vector<std::string>& names) {
  return run_gibbs(weights, X, y, cfg, names, nullptr);
}

PosteriorSummary gibbs_fit(const Network& net, const Eigen::MatrixXd& X, const BinaryVector& y,
                           const GibbsConfig& cfg, const std::vector<std::string>& names) {
  const Eigen::MatrixXd& w = cfg.weights == GibbsWeights::row_normalized ? net.weights() : net.adjacency();
  return run_gibbs(w, X, y, cfg, names, nullptr);
}

PosteriorSummary gibbs_fit_traced(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X, const BinaryVector& y,
                                  const GibbsConfig& cfg, GibbsTrace& trace) {
  return run_gibbs(weights, X, y, cfg, {}, &trace);
}

// ---------------------------------------------------------------------------

double inverse_mills(double t) {
  if (t > -30.0) {
    const double phi = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
    return phi / normal_cdf(t);
  }
  // Asymptotic expansion of phi/Phi for large negative t.
  const double t2 = t * t;
  return -t / (1.0 - 1.0 / t2 + 3.0 / (t2 * t2));
}

namespace {

double log_normal_cdf(double t) {
  if (t > -30.0) return std::log(normal_cdf(t));
  return -0.5 * t * t - std::log(-t) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double probit_log_likelihood(const Eigen::MatrixXd& X, const BinaryVector& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += log_normal_cdf(y[static_cast<std::size_t>(i)] ? eta(i) : -eta(i));
  return ll;
}

}  // namespace

ProbitFit probit_fit(const Eigen::MatrixXd& X, const BinaryVector& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (k < 1) throw InvalidArgument("design matrix needs at least one column");
  check_binary(y, n);
  if (Eigen::FullPivLU<Eigen::MatrixXd>(X).rank() < k) throw InvalidArgument("design matrix is not full column rank");

  constexpr int kMaxIter = 100;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = probit_log_likelihood(X, y, beta);
  Eigen::MatrixXd info(k, k);
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
    info.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
      const double lambda = q * inverse_mills(q * eta(i));
      grad += lambda * X.row(i).transpose();
      info += (lambda * (lambda + eta(i))) * X.row(i).transpose() * X.row(i);
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-8) {
      // A finite optimum that classifies every observation correctly only
      // arises when the classes are linearly separable.
      bool separated = true;
      for (Eigen::Index i = 0; i < n && separated; ++i)
        separated = (y[static_cast<std::size_t>(i)] ? eta(i) : -eta(i)) > 0.0;
      if (separated) throw DivergingCoefficients("probit: outcome perfectly separated by the covariates");
      ProbitFit fit;
      fit.beta = beta;
      const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
      fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
      fit.log_likelihood = ll;
      fit.iterations = iter - 1;
      return fit;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = grad;
    // Step halving until the log likelihood does not decrease.
    double scale = 1.0;
    for (int h = 0; h < 40; ++h, scale *= 0.5) {
      const Eigen::VectorXd cand = beta + scale * step;
      const double cand_ll = probit_log_likelihood(X, y, cand);
      if (cand_ll >= ll - 1e-12 * std::abs(ll)) {
        beta = cand;
        ll = cand_ll;
        break;
      }
    }
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e8)
      throw DivergingCoefficients("probit: coefficients diverged");
  }
  throw DivergingCoefficients("probit: no convergence after 100 Newton iterations");
}

}  // namespace netdiff
