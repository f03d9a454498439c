#include "netdiff/mc.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "netdiff/error.hpp"
#include "netdiff/saom.hpp"

namespace netdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& s) {
  if (s == "NA" || s.empty()) return kNaN;
  if (s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", 0);
  return v;
}

void write_header_comment(std::ostream& out, const std::string& header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ReplicationRow failed_row(ReplicationRow row, const std::string& why) {
  row.spatial_est = row.spatial_se = row.slope_est = row.slope_se = kNaN;
  row.spatial_sig = row.slope_sig = false;
  row.converged = row.accepted = false;
  row.note = why;
  return row;
}

ReplicationRow fit_gibbs(const ExperimentGrid& grid, const Dataset& data, ReplicationRow row) {
  GibbsConfig cfg = grid.gibbs;
  cfg.seed = derive_seed(data.seed, {4});
  const PosteriorSummary post = gibbs_fit(data.network, data.X, data.draw.y, cfg, {"intercept", "x"});
  row.spatial_est = post.rho().mean;
  row.spatial_se = post.rho().sd;
  row.spatial_sig = post.rho().significant;
  row.slope_est = post.beta(1).mean;
  row.slope_se = post.beta(1).sd;
  row.slope_sig = post.beta(1).significant;
  row.converged = true;
  row.accepted = true;
  return row;
}

ReplicationRow fit_saom(const ExperimentGrid& grid, const Dataset& data, ReplicationRow row, bool similarity) {
  std::vector<EffectSpec> effects{similarity ? EffectSpec::av_sim() : EffectSpec::av_alt(),
                                  EffectSpec::eff_from(1, "x")};
  ProblemOptions options;
  options.center_covariates = grid.center_covariates;
  const SaomProblem problem = build_cross_sectional_problem(data.network, data.draw.y, data.X, effects, options);
  FitConfig cfg = grid.saom;
  cfg.seed = derive_seed(data.seed, {similarity ? 5u : 6u});
  const FitResult fit = mom_estimate(problem, cfg);
  if (!fit.converged) return failed_row(row, fit.note);
  const auto wald = wald_significance(fit, grid.significance_level);
  row.spatial_est = fit.theta_hat(0);
  row.spatial_se = fit.std_errors(0);
  row.spatial_sig = wald[0].significant;
  row.slope_est = fit.theta_hat(1);
  row.slope_se = fit.std_errors(1);
  row.slope_sig = wald[1].significant;
  row.converged = true;
  row.accepted = convergence_filter(fit, 0);
  return row;
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::gibbs: return "gibbs";
    case Estimator::saom_avsim: return "saom_avsim";
    case Estimator::saom_avalt: return "saom_avalt";
  }
  return "?";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "gibbs") return Estimator::gibbs;
  if (name == "saom_avsim") return Estimator::saom_avsim;
  if (name == "saom_avalt") return Estimator::saom_avalt;
  throw InvalidArgument("unknown estimator '" + name + "' (expected gibbs|saom_avsim|saom_avalt)");
}

void validate(const ExperimentGrid& grid) {
  if (grid.reps < 1) throw InvalidArgument("grid: reps must be >= 1");
  if (!(grid.x_sd > 0.0)) throw InvalidArgument("grid: x_sd must be positive");
  if (grid.rho_values.empty() || grid.n_values.empty()) throw InvalidArgument("grid: rho_values and n_values must be nonempty");
  for (double r : grid.rho_values)
    if (!(std::abs(r) < 1.0)) throw InvalidArgument("grid: rho values must lie in (-1, 1), got " + fmt(r));
  for (int n : grid.n_values)
    if (n < 3) throw InvalidArgument("grid: n values must be >= 3, got " + std::to_string(n));
  if (grid.dgp_beta.size() != 2) throw InvalidArgument("grid: dgp_beta needs exactly (intercept, slope)");
  if (grid.estimators.empty()) throw InvalidArgument("grid: no estimators requested");
  if (!(grid.avg_degree > 0.0)) throw InvalidArgument("grid: avg_degree must be positive");
  if (grid.gibbs.burn_in < 0 || grid.gibbs.burn_in >= grid.gibbs.n_iter)
    throw InvalidArgument("grid: gibbs burn_in must lie in [0, n_iter)");
  validate(grid.saom);
}

std::uint64_t replication_seed(const ExperimentGrid& grid, double rho, int n, int rep) {
  return derive_seed(grid.master_seed, {key_of(rho), static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)});
}

Dataset make_dataset(const ExperimentGrid& grid, double rho, int n, int rep) {
  const std::uint64_t seed = replication_seed(grid, rho, n, rep);
  Network net = generate_random_geometric(n, grid.avg_degree, derive_seed(seed, {1}));
  Eigen::MatrixXd X(n, 2);
  Rng rng(derive_seed(seed, {2}));
  std::normal_distribution<double> x_dist(grid.x_mean, grid.x_sd);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x_dist(rng);
  }
  BsarParams params;
  params.rho = rho;
  params.beta = Eigen::Vector2d(grid.dgp_beta[0], grid.dgp_beta[1]);
  params.errors = grid.error_dist;
  LatentDraw draw = simulate_bsar(net, X, params, derive_seed(seed, {3}));
  return Dataset{std::move(net), std::move(X), std::move(draw), seed};
}

std::string cell_id(double rho, int n) { return "rho" + fmt(rho) + "_n" + std::to_string(n); }

std::vector<ReplicationRow> run_replication(const ExperimentGrid& grid, double rho, int n, int rep) {
  std::vector<ReplicationRow> rows;
  ReplicationRow base;
  base.cell = cell_id(rho, n);
  base.rho = rho;
  base.n = n;
  base.rep = rep;
  base.seed = replication_seed(grid, rho, n, rep);
  base.seconds = kNaN;

  std::optional<Dataset> data;
  std::string data_error;
  try {
    data = make_dataset(grid, rho, n, rep);
  } catch (const std::exception& e) {
    data_error = std::string("data generation: ") + e.what();
  }

  for (Estimator est : grid.estimators) {
    ReplicationRow row = base;
    row.estimator = est;
    if (!data) {
      rows.push_back(failed_row(row, data_error));
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      switch (est) {
        case Estimator::gibbs: row = fit_gibbs(grid, *data, row); break;
        case Estimator::saom_avsim: row = fit_saom(grid, *data, row, true); break;
        case Estimator::saom_avalt: row = fit_saom(grid, *data, row, false); break;
      }
    } catch (const std::exception& e) {
      row = failed_row(row, e.what());
    }
    row.seconds = grid.record_timings ? elapsed_since(start) : kNaN;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

struct WorkItem {
  double rho;
  int n;
  int rep;
};

std::vector<ReplicationRow> run_items(const ExperimentGrid& grid, const std::vector<WorkItem>& items, int workers,
                                      const Progress& progress) {
  std::vector<std::vector<ReplicationRow>> slots(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t k = next++; k < items.size(); k = next++) {
      slots[k] = run_replication(grid, items[k].rho, items[k].n, items[k].rep);
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, items.size());
      }
    }
  };

  const int count = std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(items.size(), 1)));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  }

  std::vector<ReplicationRow> rows;
  rows.reserve(items.size() * grid.estimators.size());
  for (auto& slot : slots)
    for (auto& row : slot) rows.push_back(std::move(row));
  return rows;
}

}  // namespace

std::vector<ReplicationRow> run_cell(double rho, int n, int reps, const ExperimentGrid& grid, int workers,
                                     const Progress& progress) {
  ExperimentGrid g = grid;
  g.reps = reps;
  g.rho_values = {rho};
  g.n_values = {n};
  validate(g);
  std::vector<WorkItem> items;
  for (int r = 0; r < reps; ++r) items.push_back({rho, n, r});
  return run_items(g, items, workers, progress);
}

std::vector<ReplicationRow> run_grid(const ExperimentGrid& grid, int workers, const Progress& progress) {
  validate(grid);
  std::vector<WorkItem> items;
  for (double rho : grid.rho_values)
    for (int n : grid.n_values)
      for (int r = 0; r < grid.reps; ++r) items.push_back({rho, n, r});
  return run_items(grid, items, workers, progress);
}

namespace {

constexpr const char* kRowColumns =
    "cell,rho,n,rep,estimator,spatial_est,spatial_se,spatial_sig,slope_est,slope_se,slope_sig,converged,accepted,"
    "seconds,seed";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_flag(const std::string& s, int line) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw ParseError("expected 0/1, got '" + s + "'", line);
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<ReplicationRow>& rows, const std::string& header_comment) {
  write_header_comment(out, header_comment);
  out << kRowColumns << '\n';
  for (const auto& r : rows) {
    out << r.cell << ',' << fmt(r.rho) << ',' << r.n << ',' << r.rep << ',' << to_string(r.estimator) << ','
        << fmt(r.spatial_est) << ',' << fmt(r.spatial_se) << ',' << (r.spatial_sig ? 1 : 0) << ','
        << fmt(r.slope_est) << ',' << fmt(r.slope_se) << ',' << (r.slope_sig ? 1 : 0) << ','
        << (r.converged ? 1 : 0) << ',' << (r.accepted ? 1 : 0) << ',' << fmt(r.seconds) << ',' << r.seed << '\n';
  }
}

std::vector<ReplicationRow> read_rows_csv(std::istream& in) {
  std::vector<ReplicationRow> rows;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      if (line != kRowColumns) throw ParseError("unexpected results header", line_no);
      have_header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 15) throw ParseError("expected 15 fields, got " + std::to_string(f.size()), line_no);
    try {
      ReplicationRow r;
      r.cell = f[0];
      r.rho = parse_real(f[1]);
      r.n = std::stoi(f[2]);
      r.rep = std::stoi(f[3]);
      r.estimator = parse_estimator(f[4]);
      r.spatial_est = parse_real(f[5]);
      r.spatial_se = parse_real(f[6]);
      r.spatial_sig = parse_flag(f[7], line_no);
      r.slope_est = parse_real(f[8]);
      r.slope_se = parse_real(f[9]);
      r.slope_sig = parse_flag(f[10], line_no);
      r.converged = parse_flag(f[11], line_no);
      r.accepted = parse_flag(f[12], line_no);
      r.seconds = parse_real(f[13]);
      r.seed = std::stoull(f[14]);
      rows.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad field: ") + e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing results header", line_no);
  return rows;
}

std::optional<Moments> sample_moments(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return Moments{mean, kNaN};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return Moments{mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::vector<CellSummary> aggregate(const std::vector<ReplicationRow>& rows) {
  if (rows.empty()) throw InvalidArgument("aggregate: no rows");
  using Key = std::tuple<double, int, int>;
  // Rows within a group are sorted by rep so sums do not depend on input order.
  std::map<Key, std::vector<const ReplicationRow*>> groups;
  for (const auto& r : rows) groups[{r.rho, r.n, static_cast<int>(r.estimator)}].push_back(&r);

  std::vector<CellSummary> table;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [](const ReplicationRow* a, const ReplicationRow* b) {
      return std::tie(a->rep, a->seed) < std::tie(b->rep, b->seed);
    });
    CellSummary s;
    s.rho = std::get<0>(key);
    s.n = std::get<1>(key);
    s.estimator = static_cast<Estimator>(std::get<2>(key));
    s.rows = static_cast<int>(members.size());
    std::vector<double> spatial, slope;
    int spatial_sig = 0, slope_sig = 0;
    for (const ReplicationRow* r : members) {
      if (!r->accepted || !r->converged) continue;
      spatial.push_back(r->spatial_est);
      slope.push_back(r->slope_est);
      spatial_sig += r->spatial_sig;
      slope_sig += r->slope_sig;
    }
    s.accepted = static_cast<int>(spatial.size());
    s.acceptance_rate = static_cast<double>(s.accepted) / s.rows;
    s.spatial = sample_moments(spatial);
    s.slope = sample_moments(slope);
    if (s.accepted > 0) {
      s.spatial_sig_rate = static_cast<double>(spatial_sig) / s.accepted;
      s.slope_sig_rate = static_cast<double>(slope_sig) / s.accepted;
    }
    table.push_back(std::move(s));
  }
  return table;
}

const CellSummary* find_summary(const std::vector<CellSummary>& table, double rho, int n, Estimator e) {
  for (const auto& s : table)
    if (s.n == n && s.estimator == e && std::abs(s.rho - rho) < 1e-12) return &s;
  return nullptr;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

void write_moment_table(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment,
                        std::optional<Moments> CellSummary::*field) {
  write_header_comment(out, header_comment);
  out << "rho,n,estimator,count,mean,sd\n";
  for (const auto& s : table) {
    const auto& m = s.*field;
    out << fmt(s.rho) << ',' << s.n << ',' << to_string(s.estimator) << ',' << s.accepted << ','
        << (m ? fmt(m->mean) : "NA") << ',' << (m ? fmt(m->sd) : "NA") << '\n';
  }
}

}  // namespace

void write_counts_csv(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment) {
  write_header_comment(out, header_comment);
  out << "rho,n,estimator,rows,accepted,rate\n";
  for (const auto& s : table)
    out << fmt(s.rho) << ',' << s.n << ',' << to_string(s.estimator) << ',' << s.rows << ',' << s.accepted << ','
        << fmt(s.acceptance_rate) << '\n';
}

void write_spatial_csv(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment) {
  write_moment_table(out, table, header_comment, &CellSummary::spatial);
}

void write_slope_csv(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment) {
  write_moment_table(out, table, header_comment, &CellSummary::slope);
}

void write_significance_csv(std::ostream& out, const std::vector<CellSummary>& table,
                            const std::string& header_comment) {
  write_header_comment(out, header_comment);
  out << "rho,n,estimator,count,spatial_sig,slope_sig\n";
  for (const auto& s : table)
    out << fmt(s.rho) << ',' << s.n << ',' << to_string(s.estimator) << ',' << s.accepted << ','
        << opt(s.spatial_sig_rate) << ',' << opt(s.slope_sig_rate) << '\n';
}

}  // namespace netdiff
