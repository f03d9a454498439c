// netdiff: command-line front end.
//
//   netdiff <generate|simulate|fit-gibbs|fit-saom|montecarlo|report>
//           [--config run.json] [--workers N] [--seed S] [--out DIR]
//
// Exit status 0 on success, 1 for configuration or input faults, 2 for numeric
// and other runtime failures. Failures print one line starting with "error:".

#include <cstdlib>
#include <limits>
#include <random>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "netdiff/bsar.hpp"
#include "netdiff/config.hpp"
#include "netdiff/error.hpp"
#include "netdiff/mc.hpp"
#include "netdiff/net.hpp"
#include "netdiff/panel.hpp"
#include "netdiff/report.hpp"
#include "netdiff/rng.hpp"
#include "netdiff/saom.hpp"
#include "netdiff/saom_fit.hpp"

namespace fs = std::filesystem;
using namespace netdiff;

namespace {

struct Options {
  std::string config;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int resolve_workers(const RunConfig& cfg, const Options& opt) {
  if (opt.workers) {
    if (*opt.workers < 1) throw InvalidArgument("--workers must be >= 1");
    return *opt.workers;
  }
  if (cfg.workers > 0) return cfg.workers;
  if (const char* env = std::getenv("NETDIFF_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InvalidArgument("NETDIFF_WORKERS must be a positive integer");
    return static_cast<int>(v);
  }
  return 1;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  return out;
}

void write_with_header(const fs::path& path, const std::string& header, const std::string& body) {
  auto out = open_out(path);
  out << "# " << header << '\n' << body;
}

// ---- data files -----------------------------------------------------------

void write_data_csv(const fs::path& path, const std::string& header, const Eigen::MatrixXd& X, const LatentDraw& d) {
  std::ostringstream s;
  s.precision(17);
  s << "node,x,y_star,y\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    s << i << ',' << X(i, 1) << ',' << d.y_star(i) << ',' << d.y[static_cast<std::size_t>(i)] << '\n';
  write_with_header(path, header, s.str());
}

struct DataFile {
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // no intercept column
  BinaryVector y;
};

DataFile read_data_csv(const fs::path& path) {
  const CsvTable t = read_csv_table(path);
  const int cy = t.column("y");
  std::vector<int> cols;
  DataFile d;
  for (int c = 0; c < static_cast<int>(t.columns.size()); ++c) {
    const auto& name = t.columns[static_cast<std::size_t>(c)];
    if (name == "node" || name == "y" || name == "y_star") continue;
    cols.push_back(c);
    d.covariate_names.push_back(name);
  }
  d.covariates.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& yv = t.rows[r][static_cast<std::size_t>(cy)];
    if (yv != "0" && yv != "1") throw ValidationError(path.string() + ": y must be 0/1 in data row " + std::to_string(r + 1));
    d.y.push_back(yv == "1");
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto& cell = t.rows[r][static_cast<std::size_t>(cols[k])];
      try {
        std::size_t used = 0;
        d.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError(path.string() + ": bad value '" + cell + "' in column " + d.covariate_names[k]);
      }
    }
  }
  return d;
}

Network load_input_network(const RunConfig& cfg) {
  if (cfg.input.network.empty()) throw InvalidArgument("config: 'input.network' is required for this command");
  return read_network(fs::path(cfg.input.network));
}

DataFile load_input_data(const RunConfig& cfg, int n) {
  if (cfg.input.data.empty()) throw InvalidArgument("config: 'input.data' is required for this command");
  DataFile d = read_data_csv(cfg.input.data);
  if (static_cast<int>(d.y.size()) != n)
    throw ValidationError("data has " + std::to_string(d.y.size()) + " rows but the network has " + std::to_string(n) +
                          " nodes");
  return d;
}

// ---- commands -------------------------------------------------------------

int cmd_generate(const RunConfig& cfg, const fs::path& out) {
  const Network net = generate_random_geometric(cfg.network.n, cfg.network.avg_degree, cfg.seed);
  std::ostringstream body;
  write_network(net, body);
  write_with_header(out / "network.txt", artifact_header(cfg), body.str());
  std::cerr << "generate: n=" << net.size() << " mean degree " << net.mean_degree() << " -> "
            << (out / "network.txt").string() << '\n';
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  const Network net = cfg.input.network.empty()
                          ? generate_random_geometric(cfg.network.n, cfg.network.avg_degree, derive_seed(cfg.seed, {1}))
                          : load_input_network(cfg);
  const int n = net.size();
  Eigen::MatrixXd X(n, 2);
  Rng rng(derive_seed(cfg.seed, {2}));
  std::normal_distribution<double> x_dist(cfg.simulate.x_mean, cfg.simulate.x_sd);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x_dist(rng);
  }
  BsarParams params;
  params.rho = cfg.simulate.rho;
  params.beta = Eigen::Vector2d(cfg.simulate.beta[0], cfg.simulate.beta[1]);
  params.errors = cfg.simulate.errors;
  const LatentDraw draw = simulate_bsar(net, X, params, derive_seed(cfg.seed, {3}));

  std::ostringstream body;
  write_network(net, body);
  write_with_header(out / "network.txt", artifact_header(cfg), body.str());
  write_data_csv(out / "data.csv", artifact_header(cfg), X, draw);
  int ones = 0;
  for (int v : draw.y) ones += v;
  std::cerr << "simulate: n=" << n << " rho=" << params.rho << " share of ones " << static_cast<double>(ones) / n
            << " -> " << out.string() << '\n';
  return 0;
}

int cmd_fit_gibbs(const RunConfig& cfg, const fs::path& out) {
  const Network net = load_input_network(cfg);
  const DataFile data = load_input_data(cfg, net.size());
  Eigen::MatrixXd X(data.covariates.rows(), data.covariates.cols() + 1);
  X << Eigen::VectorXd::Ones(X.rows()), data.covariates;
  std::vector<std::string> names{"intercept"};
  names.insert(names.end(), data.covariate_names.begin(), data.covariate_names.end());
  GibbsConfig g = cfg.gibbs;
  g.seed = cfg.seed;
  const PosteriorSummary post = gibbs_fit(net, X, data.y, g, names);

  std::ostringstream s;
  s.precision(10);
  s << "parameter,mean,sd,z,significant\n";
  for (const auto& p : post.parameters)
    s << p.name << ',' << p.mean << ',' << p.sd << ',' << p.z << ',' << (p.significant ? 1 : 0) << '\n';
  write_with_header(out / "fit_gibbs.csv", artifact_header(cfg) + " rho_interval=(" + std::to_string(post.rho_lower) +
                                               "," + std::to_string(post.rho_upper) + ")",
                    s.str());
  if (post.boundary_warning)
    std::cerr << "warning: " << post.boundary_fraction * 100 << "% of rho draws sit at the grid boundary\n";
  std::cerr << "fit-gibbs: rho " << post.rho().mean << " (sd " << post.rho().sd << ") -> "
            << (out / "fit_gibbs.csv").string() << '\n';
  return 0;
}

int cmd_fit_saom(const RunConfig& cfg, const fs::path& out) {
  ProblemOptions options;
  options.center_covariates = cfg.saom.center_covariates;
  std::optional<SaomProblem> problem;
  if (cfg.panel) {
    const PanelDataset panel = ingest_panel(cfg.panel->outcome, cfg.panel->covariates, cfg.panel->proximity,
                                            cfg.panel->options);
    std::vector<EffectSpec> effects;
    for (const auto& e : cfg.saom.effects) effects.push_back(parse_effect(e, panel.covariate_names));
    problem = build_panel_problem(panel.network, panel.outcome, panel.covariates, effects, options);
    std::cerr << "fit-saom: panel of " << panel.units.size() << " units, " << panel.waves.size() << " waves\n";
  } else {
    const Network net = load_input_network(cfg);
    const DataFile data = load_input_data(cfg, net.size());
    std::vector<EffectSpec> effects;
    for (const auto& e : cfg.saom.effects) effects.push_back(parse_effect(e, data.covariate_names));
    problem = build_cross_sectional_problem(net, data.y, data.covariates, effects, options);
  }
  FitConfig fc = cfg.saom.fit;
  fc.seed = cfg.seed;
  FitResult fit = mom_estimate(*problem, fc);
  if (!cfg.record_timings) fit.wall_seconds = std::numeric_limits<double>::quiet_NaN();
  const bool accepted = convergence_filter(fit, spatial_effect_index(problem->effects));

  std::ostringstream s;
  write_fit_csv_header(s, fit.effect_names);
  write_fit_csv_row(s, fit, accepted);
  write_with_header(out / "fit_saom.csv", artifact_header(cfg), s.str());
  if (!fit.converged) std::cerr << "warning: fit did not converge (" << fit.note << ")\n";
  std::cerr << "fit-saom: t_conv_max " << fit.t_conv_max << (accepted ? " accepted" : " rejected") << " -> "
            << (out / "fit_saom.csv").string() << '\n';
  return 0;
}

int cmd_montecarlo(const RunConfig& cfg, const fs::path& out, int workers) {
  const ExperimentGrid grid = effective_grid(cfg);
  validate(grid);
  const std::size_t total = grid.rho_values.size() * grid.n_values.size() * static_cast<std::size_t>(grid.reps);
  std::size_t last = 0;
  const auto rows = run_grid(grid, workers, [&](std::size_t done, std::size_t all) {
    if (done == all || done * 20 / all != last * 20 / all) std::cerr << "montecarlo: " << done << '/' << all << '\n';
    last = done;
  });
  const auto table = aggregate(rows);
  const std::string header = artifact_header(cfg);

  {
    auto f = open_out(out / kResultsFile);
    write_rows_csv(f, rows, header);
  }
  {
    auto f = open_out(out / kCountsFile);
    write_counts_csv(f, table, header);
  }
  {
    auto f = open_out(out / kSpatialFile);
    write_spatial_csv(f, table, header);
  }
  {
    auto f = open_out(out / kSlopeFile);
    write_slope_csv(f, table, header);
  }
  {
    auto f = open_out(out / kSignificanceFile);
    write_significance_csv(f, table, header);
  }
  std::cerr << "montecarlo: " << total << " replications, " << rows.size() << " rows -> " << out.string() << '\n';
  return 0;
}

int cmd_report(const RunConfig& cfg, const fs::path& out) {
  const fs::path input = cfg.report.input.empty() ? out : fs::path(cfg.report.input);
  const auto files = render_report(input, out, artifact_header(cfg));
  for (const auto& f : files) std::cerr << "report: " << f.string() << '\n';
  return 0;
}

int run(const std::string& command, const Options& opt) {
  RunConfig cfg = opt.config.empty() ? parse_run_config("{}") : load_run_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out) cfg.out = *opt.out;
  const int workers = resolve_workers(cfg, opt);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  {
    auto f = open_out(out / ("config." + command + ".json"));
    auto saved = nlohmann::json::parse(resolved_json(cfg));
    saved["provenance"] = artifact_header(cfg);
    f << saved.dump(2) << '\n';
  }
  if (command == "generate") return cmd_generate(cfg, out);
  if (command == "simulate") return cmd_simulate(cfg, out);
  if (command == "fit-gibbs") return cmd_fit_gibbs(cfg, out);
  if (command == "fit-saom") return cmd_fit_saom(cfg, out);
  if (command == "montecarlo") return cmd_montecarlo(cfg, out, workers);
  if (command == "report") return cmd_report(cfg, out);
  throw InvalidArgument("unknown command '" + command + "'");
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial autocorrelation in binary outcomes: BSAR Gibbs and SAOM estimators"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
  app.add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
  auto* workers_opt = app.add_option("--workers", workers, "worker threads (default: config, then NETDIFF_WORKERS)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
  const std::pair<const char*, const char*> commands[] = {
      {"generate", "random geometric network -> network.txt"},
      {"simulate", "network plus one BSAR draw -> network.txt, data.csv"},
      {"fit-gibbs", "spatial probit Gibbs fit of input.network/input.data -> fit_gibbs.csv"},
      {"fit-saom", "SAOM method-of-moments fit (cross-section or panel) -> fit_saom.csv"},
      {"montecarlo", "simulation grid -> results.csv and summary tables"},
      {"report", "summary tables -> SVG figures"},
  };
  for (const auto& [name, what] : commands) app.add_subcommand(name, what)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  if (*workers_opt) opt.workers = workers;
  if (*seed_opt) opt.seed = seed;
  if (*out_opt) opt.out = out;

  try {
    return run(app.get_subcommands().front()->get_name(), opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    const bool numeric = dynamic_cast<const NumericFailure*>(&e) != nullptr;
    const bool input_fault = !numeric && dynamic_cast<const Error*>(&e) != nullptr;
    return input_fault ? 1 : 2;
  }
}
