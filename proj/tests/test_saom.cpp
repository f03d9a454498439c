#include <algorithm>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "netdiff/error.hpp"
#include "netdiff/saom.hpp"
#include "oracles.hpp"

using namespace netdiff;

TEST_CASE("effect statistic examples") {
  const auto c = oracle::effect_examples_check();
  INFO(c.detail);
  CHECK(c.pass);
}

TEST_CASE("avSim objective difference is theta times the statistic change") {
  const NeighbourWeights tri(oracle::triangle_weights());
  const Eigen::MatrixXd none = Eigen::MatrixXd::Zero(3, 1);
  const std::vector<EffectSpec> eff{EffectSpec::av_sim()};
  const double theta = 1.7;
  const Eigen::VectorXd th = Eigen::VectorXd::Constant(1, theta);
  const std::vector<int> y{1, 1, 0};
  std::vector<int> y_up = y, y_down = y;
  y_up[2] = 1;
  y_down[2] = 0;
  const double ms = 1.0 / 3.0;
  const double diff = behaviour_objective(2, tri, y, y_up, eff, th, none, ms) -
                      behaviour_objective(2, tri, y, y_down, eff, th, none, ms);
  // s_3 with y_3 = 1: both neighbours similar, (1 - 1/3); with y_3 = 0: -1/3.
  CHECK(diff == doctest::Approx(theta * ((2.0 / 3.0) - (-1.0 / 3.0))));
  CHECK(objective_gain_of_one(2, y, eff, th, tri, none) == doctest::Approx(diff));
}

TEST_CASE("choice probabilities are a two-option logit") {
  const Network g = generate_random_geometric(30, 5.0, 3);
  const NeighbourWeights w(g);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(30, 1);
  const std::vector<EffectSpec> eff{EffectSpec::av_sim(), EffectSpec::eff_from(0), EffectSpec::linear_shape()};
  const Eigen::Vector3d th(1.2, -0.7, 0.3);
  BehaviourState st;
  st.y.resize(30);
  for (int i = 0; i < 30; ++i) st.y[i] = i % 3 == 0;
  const double ms = mean_similarity(w, st.y);
  for (int i = 0; i < 30; ++i) {
    const auto p = ministep_probabilities(i, st, eff, th, w, X, ms);
    CHECK(p.stay > 0.0);
    CHECK(p.toggle > 0.0);
    CHECK(p.stay + p.toggle == doctest::Approx(1.0));
    // Only the difference of the two objective values matters.
    CHECK(p.toggle == doctest::Approx(1.0 / (1.0 + std::exp(p.f_stay - p.f_toggle))));
  }
}

TEST_CASE("statistic bounds") {
  const Network g = generate_random_geometric(60, 5.0, 4);
  const NeighbourWeights w(g);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(60, 1);
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> y(60);
    for (auto& v : y) v = std::bernoulli_distribution(0.4)(rng);
    const double ms = mean_similarity(w, y);
    for (int i = 0; i < 60; ++i) {
      const double alt = effect_statistic(EffectSpec::av_alt(), i, w, y, X, std::nullopt);
      const double sim = effect_statistic(EffectSpec::av_sim(), i, w, y, X, ms);
      const double lin = effect_statistic(EffectSpec::linear_shape(), i, w, y, X, std::nullopt);
      CHECK(alt >= 0.0);
      CHECK(alt <= 1.0);
      CHECK(std::abs(sim) <= 1.0);
      CHECK((lin == 0.0 || lin == 1.0));
      if (g.degree(i) == 0) {
        CHECK(alt == 0.0);
        CHECK(sim == 0.0);
      }
    }
  }
}

TEST_CASE("vanishing rate leaves the state unchanged") {
  const Network g = generate_random_geometric(40, 5.0, 5);
  const NeighbourWeights w(g);
  BinaryVector y0(40);
  for (int i = 0; i < 40; ++i) y0[i] = i % 2;
  const auto end = simulate_period(w, y0, {EffectSpec::av_alt()}, Eigen::VectorXd::Constant(1, 3.0), 1e-12,
                                   Eigen::MatrixXd::Zero(40, 1), std::nullopt, 6);
  CHECK(end.y == y0);
  CHECK_THROWS_AS(simulate_period(w, y0, {EffectSpec::av_alt()}, Eigen::VectorXd::Constant(1, 3.0), 0.0,
                                  Eigen::MatrixXd::Zero(40, 1), std::nullopt, 6),
                  InvalidArgument);
}

TEST_CASE("a strong covariate effect drives everyone to one") {
  const Network g = generate_random_geometric(30, 5.0, 7);
  const NeighbourWeights w(g);
  const BinaryVector y0(30, 0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto end = simulate_period(w, y0, {EffectSpec::eff_from(0)}, Eigen::VectorXd::Constant(1, 25.0), 20.0,
                                     Eigen::MatrixXd::Ones(30, 1), std::nullopt, s);
    CHECK(std::count(end.y.begin(), end.y.end(), 1) == 30);
  }
}

TEST_CASE("two ministeps on a triangle match exact enumeration") {
  const auto exact = oracle::triangle_avalt_distribution({1, 0, 0}, 2.0, 2);
  CHECK(std::accumulate(exact.begin(), exact.end(), 0.0) == doctest::Approx(1.0));
  const auto c = oracle::ministep_enumeration_check();
  INFO(c.detail);
  CHECK(c.pass);
}

TEST_CASE("Markov property: one period equals two half periods") {
  const NeighbourWeights tri(oracle::triangle_weights());
  const std::vector<EffectSpec> eff{EffectSpec::av_alt()};
  const Eigen::VectorXd th = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 1);
  const BinaryVector y0{1, 0, 0};
  const int draws = 100000;
  std::array<double, 8> whole{}, halves{};
  auto code = [](const BinaryVector& y) { return static_cast<std::size_t>(y[0] + 2 * y[1] + 4 * y[2]); };
  PeriodOptions half;
  half.duration = 0.5;
  for (int d = 0; d < draws; ++d) {
    const auto s = static_cast<std::uint64_t>(d);
    whole[code(simulate_period(tri, y0, eff, th, 1.0, X, std::nullopt, derive_seed(1, {s})).y)] += 1.0 / draws;
    const auto mid = simulate_period(tri, y0, eff, th, 1.0, X, std::nullopt, derive_seed(2, {s}), half);
    halves[code(simulate_period(tri, mid.y, eff, th, 1.0, X, std::nullopt, derive_seed(3, {s}), half).y)] +=
        1.0 / draws;
  }
  CHECK(oracle::total_variation(whole, halves) < 0.02);
}

TEST_CASE("relabeling nodes permutes statistics") {
  const int n = 50;
  const Network g = generate_random_geometric(n, 5.0, 8);
  Eigen::MatrixXd X(n, 1);
  std::vector<int> y(n);
  Rng rng(9);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = std::normal_distribution<double>()(rng);
    y[i] = std::bernoulli_distribution(0.5)(rng);
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(n);
  for (int i = 0; i < n; ++i) P.indices()(i) = perm[i];  // old node i becomes perm[i]
  const Eigen::MatrixXd a2 = P * g.adjacency() * P.transpose();
  const Eigen::MatrixXd X2 = P * X;
  std::vector<int> y2(n);
  for (int i = 0; i < n; ++i) y2[perm[i]] = y[i];

  const NeighbourWeights w1(g), w2(Network{a2});
  const std::vector<EffectSpec> eff{EffectSpec::av_sim(), EffectSpec::av_alt(), EffectSpec::eff_from(0)};
  const double ms1 = mean_similarity(w1, y), ms2 = mean_similarity(w2, y2);
  CHECK(ms1 == doctest::Approx(ms2));
  for (const auto& e : eff)
    for (int i = 0; i < n; ++i)
      CHECK(effect_statistic(e, i, w1, y, X, ms1) == doctest::Approx(effect_statistic(e, perm[i], w2, y2, X2, ms2)));
  const Eigen::VectorXd s1 = target_statistics(w1, y, eff, X, ms1);
  const Eigen::VectorXd s2 = target_statistics(w2, y2, eff, X2, ms2);
  for (int k = 0; k < 3; ++k) CHECK(s1(k) == doctest::Approx(s2(k)));
}

TEST_CASE("ministep trace") {
  const NeighbourWeights tri(oracle::triangle_weights());
  std::vector<MinistepEvent> trace;
  PeriodOptions opt;
  opt.trace = &trace;
  const auto end = simulate_period(tri, {0, 0, 0}, {EffectSpec::eff_from(0)}, Eigen::VectorXd::Ones(1), 5.0,
                                   Eigen::MatrixXd::Ones(3, 1), std::nullopt, 3, opt);
  REQUIRE_FALSE(trace.empty());
  for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k].time >= trace[k - 1].time);
  std::ostringstream s;
  write_trace_csv(s, trace);
  const std::string text = s.str();
  CHECK(text.rfind("event,time,actor,option,f_stay,f_toggle,p_taken\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(trace.size()) + 1);
  (void)end;
}

TEST_CASE("effect parsing") {
  CHECK(parse_effect("avSim") == EffectSpec::av_sim());
  CHECK(parse_effect("effFrom:1").covariate == 1);
  const auto named = parse_effect("effFrom:income", {"age", "income"});
  CHECK(named.covariate == 1);
  CHECK(named.label == "effFrom_income");
  CHECK_THROWS_AS(parse_effect("effFrom:height", {"age"}), InvalidArgument);
  CHECK_THROWS_AS(parse_effect("density"), InvalidArgument);
  CHECK_THROWS_AS(validate_effects({EffectSpec::av_sim(), EffectSpec::av_alt()}, 1), InvalidArgument);
  CHECK(spatial_effect_index({EffectSpec::eff_from(0), EffectSpec::av_alt()}) == 1);
}
