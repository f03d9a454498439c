#include "netdiff/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "netdiff/error.hpp"

namespace netdiff {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument("config: '" + label() + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: '" + child(key) + "' has the wrong type (" + it->type_name() + ")");
    }
  }

  template <class T, class Parse>
  void get_parsed(const char* key, T& dst, Parse parse) {
    std::string text;
    get(key, text);
    if (j_.contains(key)) dst = parse(text);
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, child(key));
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw InvalidArgument("config: unknown key '" + child(key) + "'");
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_gibbs(Section s, GibbsConfig& g) {
  s.get("n_iter", g.n_iter);
  s.get("burn_in", g.burn_in);
  s.get("rho_grid_size", g.rho_grid_size);
  s.get("prior_beta_variance", g.prior_beta_variance);
  s.get("grid_margin", g.grid_margin);
  s.get("significance_level", g.significance_level);
  s.get_parsed("weights", g.weights, parse_gibbs_weights);
  s.finish();
}

void read_fit(Section& s, FitConfig& f) {
  s.get("phase1_reps", f.phase1_reps);
  s.get("phase2_subphases", f.phase2_subphases);
  s.get("phase2_initial_gain", f.phase2_initial_gain);
  s.get("phase2_base_iterations", f.phase2_base_iterations);
  s.get("phase3_reps", f.phase3_reps);
  s.get("refresh_reps", f.refresh_reps);
  s.get("derivative_step", f.derivative_step);
  s.get("theta_bound", f.theta_bound);
  s.get("max_wall_seconds", f.max_wall_seconds);
}

json gibbs_json(const GibbsConfig& g) {
  return {{"n_iter", g.n_iter},
          {"burn_in", g.burn_in},
          {"rho_grid_size", g.rho_grid_size},
          {"prior_beta_variance", g.prior_beta_variance},
          {"grid_margin", g.grid_margin},
          {"significance_level", g.significance_level},
          {"weights", to_string(g.weights)}};
}

json to_json_value(const RunConfig& c) {
  const FitConfig& f = c.saom.fit;
  json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out"] = c.out;
  j["record_timings"] = c.record_timings;
  j["network"] = {{"n", c.network.n}, {"avg_degree", c.network.avg_degree}};
  j["simulate"] = {{"rho", c.simulate.rho},
                   {"beta", c.simulate.beta},
                   {"x_mean", c.simulate.x_mean},
                   {"x_sd", c.simulate.x_sd},
                   {"errors", to_string(c.simulate.errors)}};
  j["input"] = {{"network", c.input.network}, {"data", c.input.data}};
  j["gibbs"] = gibbs_json(c.gibbs);
  j["saom"] = {{"phase1_reps", f.phase1_reps},
               {"phase2_subphases", f.phase2_subphases},
               {"phase2_initial_gain", f.phase2_initial_gain},
               {"phase2_base_iterations", f.phase2_base_iterations},
               {"phase3_reps", f.phase3_reps},
               {"refresh_reps", f.refresh_reps},
               {"derivative_step", f.derivative_step},
               {"theta_bound", f.theta_bound},
               {"max_wall_seconds", f.max_wall_seconds},
               {"effects", c.saom.effects},
               {"center_covariates", c.saom.center_covariates},
               {"significance_level", c.saom.significance_level}};
  if (c.panel) {
    json p = {{"outcome", c.panel->outcome},
              {"covariates", c.panel->covariates},
              {"proximity", c.panel->proximity},
              {"proximity_format", to_string(c.panel->options.proximity)}};
    if (c.panel->options.distance_threshold) p["distance_threshold"] = *c.panel->options.distance_threshold;
    j["panel"] = p;
  }
  std::vector<std::string> estimators;
  for (Estimator e : c.grid.estimators) estimators.push_back(to_string(e));
  j["grid"] = {{"rho_values", c.grid.rho_values},
               {"n_values", c.grid.n_values},
               {"reps", c.grid.reps},
               {"dgp_beta", c.grid.dgp_beta},
               {"x_mean", c.grid.x_mean},
               {"x_sd", c.grid.x_sd},
               {"avg_degree", c.grid.avg_degree},
               {"estimators", estimators},
               {"error_dist", to_string(c.grid.error_dist)},
               {"gibbs_weights", to_string(c.grid.gibbs.weights)}};
  j["report"] = {{"input", c.report.input}};
  return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: invalid JSON at byte ") + std::to_string(e.byte));
  }
  RunConfig c;
  Section root(doc, "");
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.get("out", c.out);
  root.get("record_timings", c.record_timings);
  std::string provenance;  // written into saved configs by the CLI, ignored on load
  root.get("provenance", provenance);

  if (auto s = root.sub("network")) {
    s->get("n", c.network.n);
    s->get("avg_degree", c.network.avg_degree);
    s->finish();
  }
  if (auto s = root.sub("simulate")) {
    s->get("rho", c.simulate.rho);
    s->get("beta", c.simulate.beta);
    s->get("x_mean", c.simulate.x_mean);
    s->get("x_sd", c.simulate.x_sd);
    s->get_parsed("errors", c.simulate.errors, parse_error_distribution);
    s->finish();
  }
  if (auto s = root.sub("input")) {
    s->get("network", c.input.network);
    s->get("data", c.input.data);
    s->finish();
  }
  if (auto s = root.sub("gibbs")) read_gibbs(*s, c.gibbs);
  if (auto s = root.sub("saom")) {
    read_fit(*s, c.saom.fit);
    s->get("effects", c.saom.effects);
    s->get("center_covariates", c.saom.center_covariates);
    s->get("significance_level", c.saom.significance_level);
    s->finish();
  }
  if (auto s = root.sub("panel")) {
    PanelSpec p;
    s->get("outcome", p.outcome);
    s->get("covariates", p.covariates);
    s->get("proximity", p.proximity);
    s->get_parsed("proximity_format", p.options.proximity, parse_proximity_format);
    double threshold = 0.0;
    s->get("distance_threshold", threshold);
    if (s->has("distance_threshold")) p.options.distance_threshold = threshold;
    s->finish();
    c.panel = std::move(p);
  }
  if (auto s = root.sub("grid")) {
    s->get("rho_values", c.grid.rho_values);
    s->get("n_values", c.grid.n_values);
    s->get("reps", c.grid.reps);
    s->get("dgp_beta", c.grid.dgp_beta);
    s->get("x_mean", c.grid.x_mean);
    s->get("x_sd", c.grid.x_sd);
    s->get("avg_degree", c.grid.avg_degree);
    std::vector<std::string> names;
    s->get("estimators", names);
    if (s->has("estimators")) {
      c.grid.estimators.clear();
      for (const auto& name : names) c.grid.estimators.push_back(parse_estimator(name));
    }
    s->get_parsed("error_dist", c.grid.error_dist, parse_error_distribution);
    s->get_parsed("gibbs_weights", c.grid.gibbs.weights, parse_gibbs_weights);
    s->finish();
  }
  if (auto s = root.sub("report")) {
    s->get("input", c.report.input);
    s->finish();
  }
  root.finish();

  if (c.workers < 0) throw InvalidArgument("config: 'workers' must be >= 0");
  if (c.network.n < 1) throw InvalidArgument("config: 'network.n' must be >= 1");
  if (c.simulate.beta.size() != 2) throw InvalidArgument("config: 'simulate.beta' needs (intercept, slope)");
  if (!(c.simulate.x_sd > 0.0)) throw InvalidArgument("config: 'simulate.x_sd' must be positive");
  if (c.gibbs.burn_in < 0 || c.gibbs.burn_in >= c.gibbs.n_iter)
    throw InvalidArgument("config: 'gibbs.burn_in' must lie in [0, n_iter)");
  if (c.gibbs.rho_grid_size < 2) throw InvalidArgument("config: 'gibbs.rho_grid_size' must be >= 2");
  try {
    validate(c.saom.fit);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

ExperimentGrid effective_grid(const RunConfig& cfg) {
  ExperimentGrid g = cfg.grid;
  g.master_seed = cfg.seed;
  const GibbsWeights weights = cfg.grid.gibbs.weights;
  g.gibbs = cfg.gibbs;
  g.gibbs.weights = weights;
  g.saom = cfg.saom.fit;
  g.center_covariates = cfg.saom.center_covariates;
  g.significance_level = cfg.saom.significance_level;
  g.record_timings = cfg.record_timings;
  return g;
}

std::string resolved_json(const RunConfig& cfg) { return to_json_value(cfg).dump(2) + "\n"; }

std::string config_hash(const RunConfig& cfg) {
  json j = to_json_value(cfg);
  j.erase("workers");
  j.erase("out");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string artifact_header(const RunConfig& cfg) {
  return "config_hash=" + config_hash(cfg) + " master_seed=" + std::to_string(cfg.seed);
}

}  // namespace netdiff
