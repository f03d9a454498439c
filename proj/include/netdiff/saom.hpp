#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netdiff/net.hpp"
#include "netdiff/rng.hpp"

namespace netdiff {

enum class EffectKind { av_sim, av_alt, eff_from, linear_shape };

/// One term of the behaviour objective function.
struct EffectSpec {
  EffectKind kind = EffectKind::linear_shape;
  int covariate = -1;  // column of X, effFrom only
  std::string label;

  static EffectSpec av_sim() { return {EffectKind::av_sim, -1, "avSim"}; }
  static EffectSpec av_alt() { return {EffectKind::av_alt, -1, "avAlt"}; }
  static EffectSpec linear_shape() { return {EffectKind::linear_shape, -1, "linear"}; }
  static EffectSpec eff_from(int covariate, std::string name = {}) {
    return {EffectKind::eff_from, covariate, name.empty() ? "effFrom_x" + std::to_string(covariate) : "effFrom_" + name};
  }

  bool is_spatial() const { return kind == EffectKind::av_sim || kind == EffectKind::av_alt; }
  bool operator==(const EffectSpec&) const = default;
};

/// Parses "avSim", "avAlt", "linearShape" or "effFrom:<column>".
EffectSpec parse_effect(const std::string& text);
/// As above; "effFrom:<name>" may also name a covariate column.
EffectSpec parse_effect(const std::string& text, const std::vector<std::string>& covariate_names);

/// Rejects models with both avSim and avAlt, or effFrom columns outside X.
void validate_effects(const std::vector<EffectSpec>& effects, Eigen::Index covariate_count);

/// Index of the avSim/avAlt effect, or -1.
int spatial_effect_index(const std::vector<EffectSpec>& effects);

using ThetaVector = Eigen::VectorXd;

struct BehaviourState {
  BinaryVector y;
  double clock = 0.0;
};

/// Compressed rows of a weight matrix; the network never changes during
/// behaviour simulation so this is built once per problem.
class NeighbourWeights {
 public:
  struct Entry {
    int j;
    double w;
  };

  explicit NeighbourWeights(const Eigen::MatrixXd& weights);
  explicit NeighbourWeights(const Network& net) : NeighbourWeights(net.weights()) {}

  int size() const noexcept { return static_cast<int>(row_sum_.size()); }
  std::span<const Entry> row(int i) const {
    const auto b = start_[static_cast<std::size_t>(i)];
    const auto e = start_[static_cast<std::size_t>(i) + 1];
    return {entries_.data() + b, e - b};
  }
  double row_sum(int i) const { return row_sum_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Entry> entries_;
  std::vector<std::size_t> start_;
  std::vector<double> row_sum_;
};

/// Mean of delta_ij = 1 - |y_i - y_j| over ordered pairs with w_ij > 0
/// (0 when there are no ties).
double mean_similarity(const NeighbourWeights& w, std::span<const int> y);

/// s_ki(W, y) for actor i. avSim requires mean_sim.
double effect_statistic(const EffectSpec& spec, int i, const NeighbourWeights& w, std::span<const int> y,
                        const Eigen::MatrixXd& X, std::optional<double> mean_sim);

/// f_i(W, y_prop) = sum_k theta_k s_ki(W, y_prop). `current` is the state the
/// proposal was derived from; the proposal may differ from it only at i.
double behaviour_objective(int i, const NeighbourWeights& w, std::span<const int> current,
                           std::span<const int> proposal, const std::vector<EffectSpec>& effects,
                           const ThetaVector& theta, const Eigen::MatrixXd& X, std::optional<double> mean_sim);

/// Choice distribution over {keep y_i, toggle y_i}: multinomial logit on the
/// objective values of the two proposed states.
struct ChoiceProbabilities {
  double stay = 0.5;
  double toggle = 0.5;
  double f_stay = 0.0;
  double f_toggle = 0.0;
};

ChoiceProbabilities ministep_probabilities(int i, const BehaviourState& state, const std::vector<EffectSpec>& effects,
                                           const ThetaVector& theta, const NeighbourWeights& w,
                                           const Eigen::MatrixXd& X, std::optional<double> mean_sim);

/// f_i(y with y_i = 1) - f_i(y with y_i = 0), computed from per-effect change
/// statistics without materializing the proposals.
double objective_gain_of_one(int i, std::span<const int> y, const std::vector<EffectSpec>& effects,
                             const ThetaVector& theta, const NeighbourWeights& w, const Eigen::MatrixXd& X);

struct MinistepEvent {
  long index = 0;
  double time = 0.0;
  int actor = 0;
  bool toggled = false;
  double f_stay = 0.0;
  double f_toggle = 0.0;
  double p_taken = 0.0;
};

struct PeriodOptions {
  double duration = 1.0;                        // model time covered
  std::vector<MinistepEvent>* trace = nullptr;  // filled when non-null
};

/// One period of behaviour dynamics with frozen ties: K ~ Poisson(n rate
/// duration) opportunities, each given to a uniformly drawn actor who keeps
/// or toggles its value by the ministep probabilities. Updates commit
/// immediately.
BehaviourState simulate_period(const NeighbourWeights& w, const BinaryVector& y0,
                               const std::vector<EffectSpec>& effects, const ThetaVector& theta, double rate,
                               const Eigen::MatrixXd& X, std::optional<double> mean_sim, std::uint64_t seed,
                               const PeriodOptions& options = {});

/// Exactly `count` ministeps from `state`, drawing from `rng`.
void run_ministeps(const NeighbourWeights& w, BehaviourState& state, const std::vector<EffectSpec>& effects,
                   const ThetaVector& theta, const Eigen::MatrixXd& X, long count, Rng& rng);

/// S_k = sum_i s_ki(W, y).
Eigen::VectorXd target_statistics(const NeighbourWeights& w, std::span<const int> y,
                                  const std::vector<EffectSpec>& effects, const Eigen::MatrixXd& X,
                                  std::optional<double> mean_sim);

void write_trace_csv(std::ostream& out, const std::vector<MinistepEvent>& trace);

}  // namespace netdiff
