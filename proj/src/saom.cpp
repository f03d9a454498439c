#include "netdiff/saom.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "netdiff/error.hpp"

namespace netdiff {

EffectSpec parse_effect(const std::string& text) {
  if (text == "avSim") return EffectSpec::av_sim();
  if (text == "avAlt") return EffectSpec::av_alt();
  if (text == "linearShape" || text == "linear") return EffectSpec::linear_shape();
  const std::string prefix = "effFrom:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string rest = text.substr(prefix.size());
    std::size_t used = 0;
    int col = -1;
    try {
      col = std::stoi(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != rest.size() || rest.empty() || col < 0) throw InvalidArgument("bad covariate index in '" + text + "'");
    return EffectSpec::eff_from(col);
  }
  throw InvalidArgument("unknown effect '" + text + "' (expected avSim|avAlt|linearShape|effFrom:<column>)");
}

EffectSpec parse_effect(const std::string& text, const std::vector<std::string>& covariate_names) {
  const std::string prefix = "effFrom:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string rest = text.substr(prefix.size());
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), rest);
    if (it != covariate_names.end())
      return EffectSpec::eff_from(static_cast<int>(it - covariate_names.begin()), rest);
  }
  EffectSpec spec = parse_effect(text);
  if (spec.kind == EffectKind::eff_from && spec.covariate < static_cast<int>(covariate_names.size()))
    spec = EffectSpec::eff_from(spec.covariate, covariate_names[static_cast<std::size_t>(spec.covariate)]);
  return spec;
}

void validate_effects(const std::vector<EffectSpec>& effects, Eigen::Index covariate_count) {
  int spatial = 0;
  for (const auto& e : effects) {
    if (e.is_spatial()) ++spatial;
    if (e.kind == EffectKind::eff_from && (e.covariate < 0 || e.covariate >= covariate_count))
      throw InvalidArgument("effFrom covariate index " + std::to_string(e.covariate) + " outside design with " +
                            std::to_string(covariate_count) + " columns");
  }
  if (spatial > 1) throw InvalidArgument("at most one of avSim / avAlt may be included");
}

int spatial_effect_index(const std::vector<EffectSpec>& effects) {
  for (std::size_t k = 0; k < effects.size(); ++k)
    if (effects[k].is_spatial()) return static_cast<int>(k);
  return -1;
}

NeighbourWeights::NeighbourWeights(const Eigen::MatrixXd& weights) {
  if (weights.rows() != weights.cols()) throw InvalidArgument("weights must be square");
  const Eigen::Index n = weights.rows();
  start_.reserve(static_cast<std::size_t>(n) + 1);
  row_sum_.reserve(static_cast<std::size_t>(n));
  start_.push_back(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = weights(i, j);
      if (v < 0.0) throw InvalidArgument("weights must be nonnegative");
      if (v != 0.0) {
        entries_.push_back({static_cast<int>(j), v});
        s += v;
      }
    }
    row_sum_.push_back(s);
    start_.push_back(entries_.size());
  }
}

double mean_similarity(const NeighbourWeights& w, std::span<const int> y) {
  double total = 0.0;
  long pairs = 0;
  for (int i = 0; i < w.size(); ++i)
    for (const auto& e : w.row(i)) {
      total += 1.0 - std::abs(y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(e.j)]);
      ++pairs;
    }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

double effect_statistic(const EffectSpec& spec, int i, const NeighbourWeights& w, std::span<const int> y,
                        const Eigen::MatrixXd& X, std::optional<double> mean_sim) {
  const auto ui = static_cast<std::size_t>(i);
  switch (spec.kind) {
    case EffectKind::linear_shape:
      return y[ui];
    case EffectKind::eff_from:
      if (spec.covariate < 0 || spec.covariate >= X.cols()) throw InvalidArgument("effFrom covariate out of range");
      return y[ui] * X(i, spec.covariate);
    case EffectKind::av_alt: {
      const double rs = w.row_sum(i);
      if (y[ui] == 0 || rs == 0.0) return 0.0;
      double acc = 0.0;
      for (const auto& e : w.row(i)) acc += e.w * y[static_cast<std::size_t>(e.j)];
      return acc / rs;
    }
    case EffectKind::av_sim: {
      if (!mean_sim) throw InvalidArgument("avSim statistic needs the mean similarity");
      const double rs = w.row_sum(i);
      if (rs == 0.0) return 0.0;
      double acc = 0.0;
      for (const auto& e : w.row(i))
        acc += e.w * (1.0 - std::abs(y[ui] - y[static_cast<std::size_t>(e.j)]) - *mean_sim);
      return acc / rs;
    }
  }
  return 0.0;
}

double behaviour_objective(int i, const NeighbourWeights& w, std::span<const int> current,
                           std::span<const int> proposal, const std::vector<EffectSpec>& effects,
                           const ThetaVector& theta, const Eigen::MatrixXd& X, std::optional<double> mean_sim) {
  if (current.size() != proposal.size() || static_cast<int>(current.size()) != w.size())
    throw InvalidArgument("state length does not match network size");
  if (i < 0 || i >= w.size()) throw InvalidArgument("actor index out of range");
  if (theta.size() != static_cast<Eigen::Index>(effects.size()))
    throw InvalidArgument("one coefficient per effect required");
  for (std::size_t j = 0; j < current.size(); ++j)
    if (static_cast<int>(j) != i && current[j] != proposal[j])
      throw InvalidArgument("proposal changes actor " + std::to_string(j) + ", but only actor " + std::to_string(i) +
                            " may move");
  double f = 0.0;
  for (std::size_t k = 0; k < effects.size(); ++k) {
    if (theta(static_cast<Eigen::Index>(k)) == 0.0) continue;
    f += theta(static_cast<Eigen::Index>(k)) * effect_statistic(effects[k], i, w, proposal, X, mean_sim);
  }
  return f;
}

ChoiceProbabilities ministep_probabilities(int i, const BehaviourState& state, const std::vector<EffectSpec>& effects,
                                           const ThetaVector& theta, const NeighbourWeights& w,
                                           const Eigen::MatrixXd& X, std::optional<double> mean_sim) {
  BinaryVector toggled = state.y;
  if (i < 0 || i >= static_cast<int>(toggled.size())) throw InvalidArgument("actor index out of range");
  toggled[static_cast<std::size_t>(i)] = 1 - toggled[static_cast<std::size_t>(i)];
  ChoiceProbabilities p;
  p.f_stay = behaviour_objective(i, w, state.y, state.y, effects, theta, X, mean_sim);
  p.f_toggle = behaviour_objective(i, w, state.y, toggled, effects, theta, X, mean_sim);
  // exp(f) / sum exp(f), shifted by the max for stability.
  const double top = std::max(p.f_stay, p.f_toggle);
  const double es = std::exp(p.f_stay - top);
  const double et = std::exp(p.f_toggle - top);
  p.stay = es / (es + et);
  p.toggle = et / (es + et);
  return p;
}

double objective_gain_of_one(int i, std::span<const int> y, const std::vector<EffectSpec>& effects,
                             const ThetaVector& theta, const NeighbourWeights& w, const Eigen::MatrixXd& X) {
  double gain = 0.0;
  double neighbour_mean = -1.0;  // lazily computed (sum_j w_ij y_j) / w_i+
  for (std::size_t k = 0; k < effects.size(); ++k) {
    const double t = theta(static_cast<Eigen::Index>(k));
    if (t == 0.0) continue;
    const auto& e = effects[k];
    switch (e.kind) {
      case EffectKind::linear_shape:
        gain += t;
        break;
      case EffectKind::eff_from:
        gain += t * X(i, e.covariate);
        break;
      case EffectKind::av_alt:
      case EffectKind::av_sim: {
        const double rs = w.row_sum(i);
        if (rs == 0.0) break;
        if (neighbour_mean < 0.0) {
          double acc = 0.0;
          for (const auto& nb : w.row(i)) acc += nb.w * y[static_cast<std::size_t>(nb.j)];
          neighbour_mean = acc / rs;
        }
        // avAlt changes by the neighbour mean; avSim by (mean of ones) - (mean of zeros).
        gain += e.kind == EffectKind::av_alt ? t * neighbour_mean : t * (2.0 * neighbour_mean - 1.0);
        break;
      }
    }
  }
  return gain;
}

namespace {

double open_unit(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

void check_state(const NeighbourWeights& w, const BinaryVector& y, const std::vector<EffectSpec>& effects,
                 const ThetaVector& theta, const Eigen::MatrixXd& X) {
  if (static_cast<int>(y.size()) != w.size()) throw InvalidArgument("state length does not match network size");
  if (X.rows() != w.size() && X.size() != 0) throw InvalidArgument("covariate rows do not match network size");
  if (theta.size() != static_cast<Eigen::Index>(effects.size()))
    throw InvalidArgument("one coefficient per effect required");
  if (!theta.allFinite()) throw InvalidArgument("coefficients must be finite");
  validate_effects(effects, X.cols());
  for (int v : y)
    if (v != 0 && v != 1) throw InvalidArgument("behaviour values must be 0/1");
}

void step_chain(const NeighbourWeights& w, BehaviourState& state, const std::vector<EffectSpec>& effects,
                const ThetaVector& theta, const Eigen::MatrixXd& X, long count, Rng& rng,
                std::optional<double> mean_sim, std::vector<MinistepEvent>* trace) {
  const int n = w.size();
  if (n == 0) return;
  std::uniform_int_distribution<int> actor_dist(0, n - 1);
  for (long k = 0; k < count; ++k) {
    const int i = actor_dist(rng);
    const double u = open_unit(rng);
    auto& yi = state.y[static_cast<std::size_t>(i)];
    const double gain = objective_gain_of_one(i, state.y, effects, theta, w, X);
    const double p_toggle = logistic(yi == 0 ? gain : -gain);
    const bool toggle = u < p_toggle;
    if (trace) {
      MinistepEvent ev;
      ev.index = static_cast<long>(trace->size());
      ev.actor = i;
      ev.toggled = toggle;
      BinaryVector flipped = state.y;
      flipped[static_cast<std::size_t>(i)] = 1 - yi;
      ev.f_stay = behaviour_objective(i, w, state.y, state.y, effects, theta, X, mean_sim);
      ev.f_toggle = behaviour_objective(i, w, state.y, flipped, effects, theta, X, mean_sim);
      ev.p_taken = toggle ? p_toggle : 1.0 - p_toggle;
      trace->push_back(ev);
    }
    if (toggle) yi = 1 - yi;
  }
}

}  // namespace

void run_ministeps(const NeighbourWeights& w, BehaviourState& state, const std::vector<EffectSpec>& effects,
                   const ThetaVector& theta, const Eigen::MatrixXd& X, long count, Rng& rng) {
  check_state(w, state.y, effects, theta, X);
  step_chain(w, state, effects, theta, X, count, rng, std::nullopt, nullptr);
}

BehaviourState simulate_period(const NeighbourWeights& w, const BinaryVector& y0,
                               const std::vector<EffectSpec>& effects, const ThetaVector& theta, double rate,
                               const Eigen::MatrixXd& X, std::optional<double> mean_sim, std::uint64_t seed,
                               const PeriodOptions& options) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("behaviour rate must be positive");
  if (!(options.duration > 0.0)) throw InvalidArgument("period duration must be positive");
  check_state(w, y0, effects, theta, X);
  if (options.trace)
    for (const auto& e : effects)
      if (e.kind == EffectKind::av_sim && !mean_sim) throw InvalidArgument("avSim statistic needs the mean similarity");

  Rng rng(seed);
  std::poisson_distribution<long> opportunities(static_cast<double>(w.size()) * rate * options.duration);
  const long count = opportunities(rng);

  BehaviourState state{y0, 0.0};
  if (options.trace) options.trace->clear();
  step_chain(w, state, effects, theta, X, count, rng, mean_sim, options.trace);

  if (options.trace && count > 0) {
    // Event times only annotate the trace, so they come from their own stream
    // and leave the chain's random numbers untouched: K uniform order
    // statistics on [0, duration] built from K + 1 exponential spacings.
    Rng time_rng(splitmix64(seed ^ 0x7472616365ULL));
    std::exponential_distribution<double> spacing(1.0);
    std::vector<double> cum(static_cast<std::size_t>(count) + 1);
    double acc = 0.0;
    for (auto& c : cum) c = (acc += spacing(time_rng));
    for (std::size_t k = 0; k < options.trace->size(); ++k) (*options.trace)[k].time = options.duration * cum[k] / acc;
  }
  state.clock = options.duration;
  return state;
}

Eigen::VectorXd target_statistics(const NeighbourWeights& w, std::span<const int> y,
                                  const std::vector<EffectSpec>& effects, const Eigen::MatrixXd& X,
                                  std::optional<double> mean_sim) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(effects.size()));
  for (std::size_t k = 0; k < effects.size(); ++k)
    for (int i = 0; i < w.size(); ++i)
      s(static_cast<Eigen::Index>(k)) += effect_statistic(effects[k], i, w, y, X, mean_sim);
  return s;
}

void write_trace_csv(std::ostream& out, const std::vector<MinistepEvent>& trace) {
  out << "event,time,actor,option,f_stay,f_toggle,p_taken\n";
  const auto old_precision = out.precision(12);
  for (const auto& e : trace)
    out << e.index << ',' << e.time << ',' << e.actor << ',' << (e.toggled ? "toggle" : "stay") << ',' << e.f_stay
        << ',' << e.f_toggle << ',' << e.p_taken << '\n';
  out.precision(old_precision);
}

}  // namespace netdiff
