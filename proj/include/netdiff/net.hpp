#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace netdiff {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Undirected, unweighted connectivity structure together with its
/// row-normalized weight matrix. Immutable after construction.
///
/// Invariants (checked by the constructor): adjacency is square, binary,
/// symmetric with zero diagonal; every non-isolate row of weights sums to 1;
/// isolate rows are zero.
class Network {
 public:
  explicit Network(Eigen::MatrixXd adjacency, std::optional<std::vector<Point>> coords = std::nullopt,
                   std::optional<double> radius = std::nullopt);

  int size() const noexcept { return static_cast<int>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const noexcept { return adjacency_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const std::optional<std::vector<Point>>& coords() const noexcept { return coords_; }
  std::optional<double> radius() const noexcept { return radius_; }

  const std::vector<int>& neighbours(int i) const { return neighbours_[static_cast<std::size_t>(i)]; }
  int degree(int i) const { return static_cast<int>(neighbours(i).size()); }
  double mean_degree() const;
  int edge_count() const;
  int isolate_count() const;

  bool operator==(const Network& other) const;

 private:
  Eigen::MatrixXd adjacency_;
  Eigen::MatrixXd weights_;
  std::optional<std::vector<Point>> coords_;
  std::optional<double> radius_;
  std::vector<std::vector<int>> neighbours_;
};

/// Points uniform on the unit square, joined when their distance is at most
/// d. The threshold is found by bisection over the sorted pairwise distances
/// of the drawn points so that the realized mean degree is the closest
/// achievable to the target.
Network generate_random_geometric(int n, double target_avg_degree, std::uint64_t seed);

/// Adjacency for a fixed point set and threshold (edges where distance <= d).
Eigen::MatrixXd geometric_adjacency(const std::vector<Point>& points, double d);

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& adjacency);

struct EigenBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// Real eigenvalues of a matrix whose spectrum is real (symmetric matrices
/// and row-normalized symmetric patterns). Throws NumericFailure if the
/// decomposition fails or a non-negligible imaginary part shows up.
Eigen::VectorXd real_spectrum(const Eigen::MatrixXd& m);

EigenBounds eigen_bounds(const Eigen::MatrixXd& weights);

void write_network(const Network& net, std::ostream& out);
void write_network(const Network& net, const std::filesystem::path& path);
Network read_network(std::istream& in);
Network read_network(const std::filesystem::path& path);

}  // namespace netdiff
