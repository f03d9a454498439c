#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netdiff/net.hpp"
#include "netdiff/rng.hpp"

namespace netdiff {

enum class ProximityFormat {
  edge_list,        // header "from,to", one undirected tie per line
  distance_matrix,  // header ",u1,u2,...", then "u,d1,d2,..." rows
};

std::string to_string(ProximityFormat f);
ProximityFormat parse_proximity_format(const std::string& name);

struct PanelOptions {
  ProximityFormat proximity = ProximityFormat::edge_list;
  // Distance at or below which two units are tied. Required for a distance
  // matrix; there is no default.
  std::optional<double> distance_threshold;
};

/// Rectangular unit x wave panel. Units keep their order of first
/// appearance in the outcome file, waves are sorted ascending.
struct PanelDataset {
  std::vector<std::string> units;
  std::vector<long> waves;
  std::vector<BinaryVector> outcome;  // outcome[t][i]
  std::vector<std::string> covariate_names;
  std::vector<Eigen::MatrixXd> covariates;  // covariates[t](i, k)
  Network network;
};

/// Reads outcome ("unit,wave,y"), covariate ("unit,wave,c1,c2,...") and
/// proximity files. Missing covariate cells (empty or NA, or a unit-wave
/// row that is absent) are linearly interpolated over waves within a unit,
/// and whatever is left is set to the covariate's overall observed mean.
/// Outcome gaps are never filled.
PanelDataset ingest_panel(std::istream& outcome_csv, std::istream& covariates_csv, std::istream& proximity,
                          const PanelOptions& options);
PanelDataset ingest_panel(const std::filesystem::path& outcome_csv, const std::filesystem::path& covariates_csv,
                          const std::filesystem::path& proximity, const PanelOptions& options);

/// Fills NaN entries of a series observed at positions `at` by linear
/// interpolation between the nearest observed neighbours. Leading and
/// trailing gaps stay NaN.
void interpolate_series(std::vector<double>& values, const std::vector<double>& at);

}  // namespace netdiff
