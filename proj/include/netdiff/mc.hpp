#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netdiff/bsar.hpp"
#include "netdiff/net.hpp"
#include "netdiff/saom_fit.hpp"

namespace netdiff {

enum class Estimator { gibbs, saom_avsim, saom_avalt };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

/// The rho x n x replication design plus every estimator setting.
struct ExperimentGrid {
  std::vector<double> rho_values{-0.8, -0.6, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8};
  std::vector<int> n_values{50, 250, 500};
  int reps = 500;
  std::vector<double> dgp_beta{4.0, -2.0};  // intercept, slope
  double x_mean = 2.0;
  double x_sd = 2.0;
  double avg_degree = 5.0;
  std::vector<Estimator> estimators{Estimator::gibbs, Estimator::saom_avsim, Estimator::saom_avalt};
  std::uint64_t master_seed = 20190601;

  ErrorDistribution error_dist = ErrorDistribution::logistic;
  GibbsConfig gibbs = default_gibbs();
  FitConfig saom;
  bool center_covariates = true;
  double significance_level = 0.05;  // SAOM Wald tests; Gibbs uses gibbs.significance_level
  bool record_timings = false;  // false writes NA so reruns are byte-identical

  static GibbsConfig default_gibbs() {
    GibbsConfig g;
    g.weights = GibbsWeights::binary;
    return g;
  }
};

void validate(const ExperimentGrid& grid);

/// One simulated replication: network, design [1, x] and BSAR outcome.
struct Dataset {
  Network network;
  Eigen::MatrixXd X;
  LatentDraw draw;
  std::uint64_t seed = 0;
};

std::uint64_t replication_seed(const ExperimentGrid& grid, double rho, int n, int rep);
Dataset make_dataset(const ExperimentGrid& grid, double rho, int n, int rep);

std::string cell_id(double rho, int n);

struct ReplicationRow {
  std::string cell;
  double rho = 0.0;
  int n = 0;
  int rep = 0;
  Estimator estimator = Estimator::gibbs;
  double spatial_est = 0.0;
  double spatial_se = 0.0;
  bool spatial_sig = false;
  double slope_est = 0.0;
  double slope_se = 0.0;
  bool slope_sig = false;
  bool converged = false;
  bool accepted = false;
  double seconds = 0.0;  // NaN when timings are not recorded
  std::uint64_t seed = 0;
  std::string note;  // failure reason; not serialized
};

/// Every requested estimator on one dataset. Failures become rows with
/// converged = accepted = false and NaN estimates.
std::vector<ReplicationRow> run_replication(const ExperimentGrid& grid, double rho, int n, int rep);

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// reps replications of one cell; rows ordered by rep then estimator.
std::vector<ReplicationRow> run_cell(double rho, int n, int reps, const ExperimentGrid& grid, int workers = 1,
                                     const Progress& progress = {});

/// The whole grid, cells in (rho, n) order. Output does not depend on the
/// worker count.
std::vector<ReplicationRow> run_grid(const ExperimentGrid& grid, int workers = 1, const Progress& progress = {});

void write_rows_csv(std::ostream& out, const std::vector<ReplicationRow>& rows, const std::string& header_comment);
std::vector<ReplicationRow> read_rows_csv(std::istream& in);

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // divisor count - 1; NaN for a single value
};

struct CellSummary {
  double rho = 0.0;
  int n = 0;
  Estimator estimator = Estimator::gibbs;
  int rows = 0;
  int accepted = 0;
  double acceptance_rate = 0.0;
  std::optional<Moments> spatial;
  std::optional<Moments> slope;
  std::optional<double> spatial_sig_rate;
  std::optional<double> slope_sig_rate;
};

std::optional<Moments> sample_moments(const std::vector<double>& values);

/// Groups rows by (rho, n, estimator) in ascending order and summarizes
/// the accepted ones.
std::vector<CellSummary> aggregate(const std::vector<ReplicationRow>& rows);

const CellSummary* find_summary(const std::vector<CellSummary>& table, double rho, int n, Estimator e);

// File names used for a Monte Carlo run's artifacts.
inline constexpr const char* kResultsFile = "results.csv";
inline constexpr const char* kCountsFile = "table1_counts.csv";
inline constexpr const char* kSpatialFile = "table2_spatial.csv";
inline constexpr const char* kSlopeFile = "table3_slope.csv";
inline constexpr const char* kSignificanceFile = "significance.csv";

void write_counts_csv(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment);
void write_spatial_csv(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment);
void write_slope_csv(std::ostream& out, const std::vector<CellSummary>& table, const std::string& header_comment);
void write_significance_csv(std::ostream& out, const std::vector<CellSummary>& table,
                            const std::string& header_comment);

}  // namespace netdiff
