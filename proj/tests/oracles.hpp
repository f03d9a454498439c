#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the code paths it checks.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netdiff/bsar.hpp"
#include "netdiff/net.hpp"
#include "netdiff/rng.hpp"
#include "netdiff/saom.hpp"
#include "netdiff/saom_fit.hpp"

namespace oracle {

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

inline std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// (I - rho W)^-1 b by the Neumann series, truncated after `terms` powers.
inline Eigen::VectorXd neumann_solve(const Eigen::MatrixXd& w, double rho, const Eigen::VectorXd& b, int terms = 200) {
  Eigen::VectorXd term = b;
  Eigen::VectorXd sum = b;
  for (int k = 1; k < terms; ++k) {
    term = rho * (w * term);
    sum += term;
  }
  return sum;
}

// Three mutually tied actors, row-normalized.
inline Eigen::MatrixXd triangle_weights() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(3, 3, 0.5);
  w.diagonal().setZero();
  return w;
}

// Exact distribution over the 8 end states of K ministeps on the triangle
// with an avAlt-only objective: f_i(y) = theta * y_i * mean of the other
// two. Each step picks an actor uniformly, then keeps or toggles by logit.
inline std::array<double, 8> triangle_avalt_distribution(std::array<int, 3> y0, double theta, int steps) {
  auto code = [](const std::array<int, 3>& y) { return y[0] + 2 * y[1] + 4 * y[2]; };
  std::array<double, 8> p{};
  p[static_cast<std::size_t>(code(y0))] = 1.0;
  for (int s = 0; s < steps; ++s) {
    std::array<double, 8> next{};
    for (int c = 0; c < 8; ++c) {
      if (p[static_cast<std::size_t>(c)] == 0.0) continue;
      const std::array<int, 3> y{c & 1, (c >> 1) & 1, (c >> 2) & 1};
      for (int i = 0; i < 3; ++i) {
        double others = 0.0;
        for (int j = 0; j < 3; ++j)
          if (j != i) others += 0.5 * y[static_cast<std::size_t>(j)];
        const double f_one = theta * others;  // objective with y_i = 1
        const double f_zero = 0.0;
        const int yi = y[static_cast<std::size_t>(i)];
        const double f_stay = yi ? f_one : f_zero;
        const double f_toggle = yi ? f_zero : f_one;
        const double p_toggle = std::exp(f_toggle) / (std::exp(f_stay) + std::exp(f_toggle));
        std::array<int, 3> t = y;
        t[static_cast<std::size_t>(i)] = 1 - yi;
        next[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)] / 3.0 * (1.0 - p_toggle);
        next[static_cast<std::size_t>(code(t))] += p[static_cast<std::size_t>(c)] / 3.0 * p_toggle;
      }
    }
    p = next;
  }
  return p;
}

template <class Distribution>
double total_variation(const Distribution& a, const Distribution& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

// End-state frequencies of `draws` independent K-step chains run by the library.
inline std::array<double, 8> triangle_simulated(std::array<int, 3> y0, double theta, int steps, int draws,
                                                std::uint64_t seed) {
  const netdiff::NeighbourWeights w(triangle_weights());
  const std::vector<netdiff::EffectSpec> effects{netdiff::EffectSpec::av_alt()};
  const Eigen::VectorXd th = Eigen::VectorXd::Constant(1, theta);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 1);
  netdiff::Rng rng(seed);
  std::array<double, 8> freq{};
  for (int d = 0; d < draws; ++d) {
    netdiff::BehaviourState st;
    st.y.assign(y0.begin(), y0.end());
    netdiff::run_ministeps(w, st, effects, th, X, steps, rng);
    freq[static_cast<std::size_t>(st.y[0] + 2 * st.y[1] + 4 * st.y[2])] += 1.0 / draws;
  }
  return freq;
}

// ---- grouped checks -------------------------------------------------------

inline Check bsar_solve_check() {
  Check c;
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(2, 2);
  const auto d = netdiff::solve_bsar(w, X, 0.5, Eigen::Vector2d(1.0, -1.0), Eigen::VectorXd::Zero(2));
  c.require(std::abs(d.y_star(0) - 2.0 / 3.0) < 1e-6 && std::abs(d.y_star(1) + 2.0 / 3.0) < 1e-6,
            "2x2 solve gave (" + num(d.y_star(0)) + ", " + num(d.y_star(1)) + ")");
  c.require(d.y == netdiff::BinaryVector{1, 0}, "2x2 observed outcome is not (1, 0)");

  const netdiff::Network net = netdiff::generate_random_geometric(60, 5.0, 11);
  Eigen::MatrixXd Xr(60, 2);
  netdiff::Rng rng(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 60; ++i) Xr.row(i) << 1.0, nd(rng);
  const Eigen::VectorXd eps = Eigen::VectorXd::NullaryExpr(60, [&] { return nd(rng); });
  const Eigen::Vector2d beta(0.5, -1.0);
  double worst = 0.0;
  for (double rho : {-0.8, -0.3, 0.3, 0.8}) {
    const auto got = netdiff::solve_bsar(net.weights(), Xr, rho, beta, eps);
    const Eigen::VectorXd want = neumann_solve(net.weights(), rho, Xr * beta + eps);
    worst = std::max(worst, (got.y_star - want).cwiseAbs().maxCoeff());
  }
  c.require(worst < 1e-6, "series expansion differs by " + num(worst));
  return c;
}

inline Check ministep_enumeration_check(int draws = 100000) {
  Check c;
  for (const auto& y0 : {std::array<int, 3>{1, 0, 0}, std::array<int, 3>{0, 1, 1}}) {
    const auto exact = triangle_avalt_distribution(y0, 2.0, 2);
    const auto sim = triangle_simulated(y0, 2.0, 2, draws, 77);
    const double tv = total_variation(exact, sim);
    c.require(tv < 0.02, "TV " + num(tv) + " from start " + std::to_string(y0[0]) + std::to_string(y0[1]) +
                             std::to_string(y0[2]));
  }
  return c;
}

inline Check gibbs_probit_check() {
  Check c;
  const int n = 500;
  netdiff::Rng rng(2024);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(n, 2);
  netdiff::BinaryVector y(n);
  for (int i = 0; i < n; ++i) {
    X.row(i) << 1.0, nd(rng);
    y[static_cast<std::size_t>(i)] = 0.3 - 0.8 * X(i, 1) + nd(rng) > 0.0;
  }
  const auto mle = netdiff::probit_fit(X, y);
  netdiff::GibbsConfig cfg;
  cfg.seed = 99;
  const auto post = netdiff::gibbs_fit(Eigen::MatrixXd::Zero(n, n), X, y, cfg);
  for (int j = 0; j < 2; ++j) {
    const double diff = std::abs(post.beta(j).mean - mle.beta(j));
    c.require(diff < 0.1, "beta" + std::to_string(j) + " differs from the probit MLE by " + num(diff));
  }
  return c;
}

inline Check effect_examples_check() {
  using netdiff::EffectSpec;
  Check c;
  auto eq = [&](double got, double want, const std::string& what) {
    c.require(std::abs(got - want) < 1e-12, what + " = " + num(got) + ", expected " + num(want));
  };
  const netdiff::NeighbourWeights tri(triangle_weights());
  const Eigen::MatrixXd none = Eigen::MatrixXd::Zero(3, 1);
  const std::vector<int> y{1, 1, 0};

  eq(netdiff::mean_similarity(tri, y), 1.0 / 3.0, "mean similarity");
  eq(netdiff::effect_statistic(EffectSpec::av_sim(), 0, tri, y, none, 1.0 / 3.0), 1.0 / 6.0, "avSim s_1");
  eq(netdiff::effect_statistic(EffectSpec::av_sim(), 2, tri, y, none, 1.0 / 3.0), -1.0 / 3.0, "avSim s_3");
  eq(netdiff::target_statistics(tri, y, {EffectSpec::av_alt()}, none, std::nullopt)(0), 1.0, "avAlt S");
  eq(netdiff::target_statistics(tri, y, {EffectSpec::av_sim()}, none, 1.0 / 3.0)(0), 0.0, "avSim S");
  eq(netdiff::target_statistics(tri, std::vector<int>{0, 0, 0}, {EffectSpec::av_alt()}, none, std::nullopt)(0), 0.0,
     "avAlt S all zero");

  // Star: centre 0 with neighbours valued (1, 0, 1, 0).
  Eigen::MatrixXd star = Eigen::MatrixXd::Zero(5, 5);
  for (int j = 1; j < 5; ++j) star(0, j) = star(j, 0) = 1.0;
  const netdiff::NeighbourWeights sw(netdiff::row_normalize(star));
  const Eigen::MatrixXd x5 = Eigen::MatrixXd::Zero(5, 1);
  eq(netdiff::effect_statistic(EffectSpec::av_alt(), 0, sw, std::vector<int>{1, 1, 0, 1, 0}, x5, std::nullopt), 0.5,
     "avAlt centre");
  eq(netdiff::effect_statistic(EffectSpec::av_alt(), 0, sw, std::vector<int>{0, 1, 0, 1, 0}, x5, std::nullopt), 0.0,
     "avAlt with y_i = 0");

  Eigen::MatrixXd xneg = Eigen::MatrixXd::Zero(3, 1);
  xneg(0, 0) = -2.0;
  eq(netdiff::effect_statistic(EffectSpec::eff_from(0), 0, tri, y, xneg, std::nullopt), -2.0, "effFrom");

  // Objective and choice probabilities.
  Eigen::MatrixXd xone = Eigen::MatrixXd::Ones(3, 1);
  const std::vector<EffectSpec> eff{EffectSpec::eff_from(0)};
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  eq(netdiff::behaviour_objective(0, tri, std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 0}, eff, one, xone,
                                  std::nullopt),
     1.0, "effFrom objective");
  eq(netdiff::behaviour_objective(0, tri, y, y, {EffectSpec::av_sim()}, Eigen::VectorXd::Zero(1), none, 1.0 / 3.0),
     0.0, "objective at theta = 0");
  netdiff::BehaviourState st;
  st.y = {0, 0, 0};
  const auto p = netdiff::ministep_probabilities(0, st, eff, one, tri, xone, std::nullopt);
  c.require(std::abs(p.toggle - std::exp(1.0) / (1.0 + std::exp(1.0))) < 1e-12, "toggle probability " + num(p.toggle));
  const auto p0 = netdiff::ministep_probabilities(0, st, eff, Eigen::VectorXd::Zero(1), tri, xone, std::nullopt);
  eq(p0.toggle, 0.5, "toggle probability at theta = 0");
  return c;
}

inline Check anchor_pattern_check() {
  Check c;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i + 1 < 4; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  const netdiff::Network net(a);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 1);
  const auto prob = netdiff::build_cross_sectional_problem(
      net, {1, 0, 1, 1}, X, {netdiff::EffectSpec::av_sim(), netdiff::EffectSpec::linear_shape()});
  c.require(prob.waves.size() == 2, "expected two waves");
  if (prob.waves.size() == 2) {
    c.require(prob.waves[0] == netdiff::BinaryVector{0, 1, 1, 1}, "wave 0 is not (0,1,1,1)");
    c.require(prob.waves[1] == netdiff::BinaryVector{1, 0, 1, 1}, "wave 1 is not (1,0,1,1)");
  }
  c.require(prob.effects.size() == 1 && prob.effects[0] == netdiff::EffectSpec::av_sim(),
            "linear shape was not dropped");
  c.require(prob.ties_structural, "ties not structural");
  return c;
}

}  // namespace oracle
