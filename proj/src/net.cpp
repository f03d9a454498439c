#include "netdiff/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "netdiff/error.hpp"
#include "netdiff/rng.hpp"

namespace netdiff {

namespace {

bool is_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (m(i, j) != m(j, i)) return false;
  return true;
}

// True when m = D^-1 A for a symmetric 0/1 pattern A: symmetric support and
// constant nonzero entries within each row.
bool is_row_scaled_symmetric_pattern(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  const Eigen::Index n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    double c = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = m(i, j);
      if (v < 0.0) return false;
      if ((v > 0.0) != (m(j, i) > 0.0)) return false;
      if (v > 0.0) {
        if (c == 0.0) c = v;
        else if (std::abs(v - c) > 1e-12 * c) return false;
      }
    }
  }
  return true;
}

}  // namespace

Network::Network(Eigen::MatrixXd adjacency, std::optional<std::vector<Point>> coords,
                 std::optional<double> radius)
    : adjacency_(std::move(adjacency)), coords_(std::move(coords)), radius_(radius) {
  const Eigen::Index n = adjacency_.rows();
  if (n != adjacency_.cols()) throw InvalidArgument("adjacency matrix must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency_(i, i) != 0.0) throw ValidationError("self-loop at node " + std::to_string(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency_(i, j);
      if (a != 0.0 && a != 1.0) throw ValidationError("adjacency must be binary");
      if (a != adjacency_(j, i))
        throw ValidationError("asymmetric adjacency between " + std::to_string(i) + " and " +
                              std::to_string(j));
    }
  }
  if (coords_ && static_cast<Eigen::Index>(coords_->size()) != n)
    throw ValidationError("coordinate count does not match node count");
  weights_ = row_normalize(adjacency_);
  neighbours_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (adjacency_(i, j) != 0.0) neighbours_[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
}

double Network::mean_degree() const {
  if (size() == 0) return 0.0;
  return 2.0 * edge_count() / size();
}

int Network::edge_count() const {
  std::size_t total = 0;
  for (const auto& nb : neighbours_) total += nb.size();
  return static_cast<int>(total / 2);
}

int Network::isolate_count() const {
  return static_cast<int>(std::count_if(neighbours_.begin(), neighbours_.end(),
                                        [](const auto& nb) { return nb.empty(); }));
}

bool Network::operator==(const Network& other) const {
  return adjacency_ == other.adjacency_ && coords_ == other.coords_ && radius_ == other.radius_;
}

Eigen::MatrixXd geometric_adjacency(const std::vector<Point>& points, double d) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::hypot(points[i].x - points[j].x, points[i].y - points[j].y) <= d) a(i, j) = a(j, i) = 1.0;
    }
  return a;
}

Network generate_random_geometric(int n, double target_avg_degree, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("random geometric network needs n >= 1");
  if (!(target_avg_degree > 0.0)) throw InvalidArgument("target average degree must be positive");
  // A single node has no pairs; the target is moot rather than unreachable.
  if (n > 1 && target_avg_degree >= n - 1)
    throw InvalidArgument("target average degree " + std::to_string(target_avg_degree) +
                          " unreachable with " + std::to_string(n) + " nodes");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> points(static_cast<std::size_t>(n));
  for (auto& p : points) {
    p.x = unit(rng);
    p.y = unit(rng);
  }
  if (n == 1) return Network(Eigen::MatrixXd::Zero(1, 1), points, 0.0);

  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      dist.push_back(std::hypot(points[i].x - points[j].x, points[i].y - points[j].y));
  std::sort(dist.begin(), dist.end());

  // Mean degree at threshold d is 2 * #{pairs with distance <= d} / n, a step
  // function of d. Bisect on d to find the step closest to the target.
  auto mean_degree_at = [&](double d) {
    const auto pairs = std::upper_bound(dist.begin(), dist.end(), d) - dist.begin();
    return 2.0 * static_cast<double>(pairs) / n;
  };
  double lo = 0.0;
  double hi = dist.back();
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mean_degree_at(mid) < target_avg_degree) lo = mid;
    else hi = mid;
  }
  // lo sits on the last step below the target, hi on the first at or above.
  // Snap each to an attained distance and keep the closer step.
  auto snap = [&](double d) {
    auto it = std::upper_bound(dist.begin(), dist.end(), d);
    return it == dist.begin() ? 0.0 : *(it - 1);
  };
  const double below = snap(lo);
  const double above = snap(hi);
  const double d = std::abs(mean_degree_at(below) - target_avg_degree) <=
                           std::abs(mean_degree_at(above) - target_avg_degree)
                       ? below
                       : above;
  Eigen::MatrixXd adjacency = geometric_adjacency(points, d);
  return Network(std::move(adjacency), std::move(points), d);
}

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw InvalidArgument("row_normalize: matrix must be square");
  Eigen::MatrixXd w = adjacency;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double s = w.row(i).sum();
    if (s != 0.0) w.row(i) /= s;
  }
  return w;
}

Eigen::VectorXd real_spectrum(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("spectrum of a non-square matrix");
  if (m.rows() == 0) return {};
  const bool symmetric = is_symmetric(m);
  if (symmetric || is_row_scaled_symmetric_pattern(m)) {
    // D^-1 A is similar to D^-1/2 A D^-1/2, whose entries are sqrt(w_ij w_ji).
    const Eigen::MatrixXd s = symmetric ? m : (m.array() * m.transpose().array()).sqrt().matrix().eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericFailure("symmetric eigendecomposition failed");
    return solver.eigenvalues();
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success) throw NumericFailure("eigendecomposition failed");
  const Eigen::VectorXcd ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.imag().cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw NumericFailure("weights matrix has complex eigenvalues");
  Eigen::VectorXd re = ev.real();
  std::sort(re.data(), re.data() + re.size());
  return re;
}

EigenBounds eigen_bounds(const Eigen::MatrixXd& weights) {
  const Eigen::VectorXd ev = real_spectrum(weights);
  if (ev.size() == 0) return {};
  return {ev.minCoeff(), ev.maxCoeff()};
}

void write_network(const Network& net, std::ostream& out) {
  out << "# undirected network, 0-based node ids\n";
  out << "n " << net.size() << '\n';
  out << std::setprecision(17);
  if (net.radius()) out << "radius " << *net.radius() << '\n';
  if (net.coords()) {
    out << "coords\n";
    const auto& c = *net.coords();
    for (std::size_t i = 0; i < c.size(); ++i) out << i << ' ' << c[i].x << ' ' << c[i].y << '\n';
  }
  out << "edges sym\n";
  for (int i = 0; i < net.size(); ++i)
    for (int j : net.neighbours(i))
      if (j > i) out << i << ' ' << j << '\n';
}

void write_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  write_network(net, out);
}

Network read_network(std::istream& in) {
  enum class Block { header, coords, edges };
  Block block = Block::header;
  bool symmetrize = false;
  std::optional<int> n;
  std::optional<double> radius;
  std::vector<Point> coords;
  std::vector<bool> has_coord;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> edge_lines;

  std::string raw;
  int line_no = 0;
  auto node_id = [&](const std::string& tok, int line) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      throw ParseError("expected integer node id, got '" + tok + "'", line);
    }
    if (used != tok.size()) throw ParseError("expected integer node id, got '" + tok + "'", line);
    if (v < 0 || v >= *n) throw ValidationError("line " + std::to_string(line) + ": node id " + tok + " out of range");
    return static_cast<int>(v);
  };
  auto real = [](const std::string& tok, int line) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ParseError("expected number, got '" + tok + "'", line);
    }
    if (used != tok.size()) throw ParseError("expected number, got '" + tok + "'", line);
    return v;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (tok[0] == "n") {
      if (n) throw ParseError("duplicate 'n' header", line_no);
      if (tok.size() != 2) throw ParseError("expected 'n <count>'", line_no);
      const double v = real(tok[1], line_no);
      if (v < 0 || v != std::floor(v)) throw ParseError("node count must be a nonnegative integer", line_no);
      n = static_cast<int>(v);
      coords.assign(static_cast<std::size_t>(*n), Point{});
      has_coord.assign(static_cast<std::size_t>(*n), false);
      continue;
    }
    if (!n) throw ParseError("file must start with 'n <count>'", line_no);
    if (tok[0] == "radius") {
      if (tok.size() != 2) throw ParseError("expected 'radius <d>'", line_no);
      radius = real(tok[1], line_no);
      continue;
    }
    if (tok[0] == "coords") {
      if (tok.size() != 1) throw ParseError("unexpected tokens after 'coords'", line_no);
      block = Block::coords;
      continue;
    }
    if (tok[0] == "edges") {
      if (tok.size() > 2 || (tok.size() == 2 && tok[1] != "sym"))
        throw ParseError("expected 'edges' or 'edges sym'", line_no);
      block = Block::edges;
      symmetrize = tok.size() == 2;
      continue;
    }
    switch (block) {
      case Block::header:
        throw ParseError("unexpected line before 'coords' or 'edges' block", line_no);
      case Block::coords: {
        if (tok.size() != 3) throw ParseError("expected 'id x y'", line_no);
        const int id = node_id(tok[0], line_no);
        coords[static_cast<std::size_t>(id)] = {real(tok[1], line_no), real(tok[2], line_no)};
        has_coord[static_cast<std::size_t>(id)] = true;
        break;
      }
      case Block::edges: {
        if (tok.size() != 2) throw ParseError("expected 'i j'", line_no);
        const int i = node_id(tok[0], line_no);
        const int j = node_id(tok[1], line_no);
        if (i == j) throw ValidationError("line " + std::to_string(line_no) + ": self-loop on node " + tok[0]);
        edges.emplace_back(i, j);
        edge_lines.push_back(line_no);
        break;
      }
    }
  }
  if (!n) throw ParseError("missing 'n <count>' header", line_no);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(*n, *n);
  for (auto [i, j] : edges) {
    a(i, j) = 1.0;
    if (symmetrize) a(j, i) = 1.0;
  }
  if (!symmetrize)
    for (std::size_t k = 0; k < edges.size(); ++k) {
      auto [i, j] = edges[k];
      if (a(j, i) == 0.0)
        throw ValidationError("line " + std::to_string(edge_lines[k]) + ": edge (" + std::to_string(i) + "," +
                              std::to_string(j) + ") has no reverse edge");
    }

  std::optional<std::vector<Point>> maybe_coords;
  const auto with_coords = std::count(has_coord.begin(), has_coord.end(), true);
  if (with_coords > 0) {
    if (with_coords != *n) throw ValidationError("coords block must list every node");
    maybe_coords = std::move(coords);
  }
  return Network(std::move(a), std::move(maybe_coords), radius);
}

Network read_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open network file " + path.string());
  return read_network(in);
}

}  // namespace netdiff
