#include "netdiff/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "netdiff/error.hpp"

namespace netdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;
};

Table read_table(std::istream& in, const std::string& what) {
  Table t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto fields = split(s);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(what + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (t.header.empty()) throw ParseError(what + ": empty file", line_no);
  return t;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "na" || s == "."; }

double to_real(const std::string& s, int line, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ParseError(what + ": bad number '" + s + "'", line);
  return v;
}

long to_wave(const std::string& s, int line) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad wave '" + s + "'", line);
  return v;
}

void expect_header(const Table& t, const std::vector<std::string>& lead, const std::string& what) {
  if (t.header.size() < lead.size() || !std::equal(lead.begin(), lead.end(), t.header.begin())) {
    std::string want;
    for (const auto& s : lead) want += (want.empty() ? "" : ",") + s;
    throw ParseError(what + ": header must start with " + want, 1);
  }
}

Eigen::MatrixXd read_edge_list(std::istream& in, const std::unordered_map<std::string, int>& index) {
  const Table t = read_table(in, "proximity");
  expect_header(t, {"from", "to"}, "proximity");
  if (t.header.size() != 2) throw ParseError("proximity: edge list has exactly two columns", 1);
  const auto n = static_cast<Eigen::Index>(index.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto i = index.find(t.rows[r][0]);
    const auto j = index.find(t.rows[r][1]);
    if (i == index.end() || j == index.end())
      throw ValidationError("proximity line " + std::to_string(t.lines[r]) + ": unit '" +
                            (i == index.end() ? t.rows[r][0] : t.rows[r][1]) + "' is not in the outcome panel");
    if (i->second == j->second)
      throw ValidationError("proximity line " + std::to_string(t.lines[r]) + ": self tie on '" + t.rows[r][0] + "'");
    a(i->second, j->second) = a(j->second, i->second) = 1.0;
  }
  return a;
}

Eigen::MatrixXd read_distance_matrix(std::istream& in, const std::unordered_map<std::string, int>& index,
                                     double threshold) {
  const Table t = read_table(in, "proximity");
  const auto n = static_cast<Eigen::Index>(index.size());
  if (t.header.size() != static_cast<std::size_t>(n) + 1 || t.rows.size() != static_cast<std::size_t>(n))
    throw ValidationError("proximity: distance matrix must be " + std::to_string(n) + " x " + std::to_string(n) +
                          " with labelled rows and columns");
  std::vector<int> col(static_cast<std::size_t>(n));
  std::set<int> seen;
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto it = index.find(t.header[static_cast<std::size_t>(c) + 1]);
    if (it == index.end() || !seen.insert(it->second).second)
      throw ValidationError("proximity: column '" + t.header[static_cast<std::size_t>(c) + 1] +
                            "' is unknown or repeated");
    col[static_cast<std::size_t>(c)] = it->second;
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, kNaN);
  seen.clear();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto it = index.find(t.rows[r][0]);
    if (it == index.end() || !seen.insert(it->second).second)
      throw ValidationError("proximity line " + std::to_string(t.lines[r]) + ": row '" + t.rows[r][0] +
                            "' is unknown or repeated");
    for (Eigen::Index c = 0; c < n; ++c)
      d(it->second, col[static_cast<std::size_t>(c)]) =
          to_real(t.rows[r][static_cast<std::size_t>(c) + 1], t.lines[r], "proximity");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (d(i, j) != d(j, i)) throw ValidationError("proximity: distance matrix is not symmetric");
      if (i != j && d(i, j) <= threshold) a(i, j) = 1.0;
    }
  return a;
}

}  // namespace

std::string to_string(ProximityFormat f) {
  return f == ProximityFormat::edge_list ? "edge_list" : "distance_matrix";
}

ProximityFormat parse_proximity_format(const std::string& name) {
  if (name == "edge_list") return ProximityFormat::edge_list;
  if (name == "distance_matrix") return ProximityFormat::distance_matrix;
  throw InvalidArgument("unknown proximity format '" + name + "' (expected edge_list|distance_matrix)");
}

void interpolate_series(std::vector<double>& values, const std::vector<double>& at) {
  if (values.size() != at.size()) throw InvalidArgument("interpolate_series: length mismatch");
  std::optional<std::size_t> prev;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (std::isnan(values[k])) continue;
    if (prev && k > *prev + 1) {
      const double x0 = at[*prev], x1 = at[k], y0 = values[*prev], y1 = values[k];
      for (std::size_t m = *prev + 1; m < k; ++m) values[m] = y0 + (y1 - y0) * (at[m] - x0) / (x1 - x0);
    }
    prev = k;
  }
}

PanelDataset ingest_panel(std::istream& outcome_csv, std::istream& covariates_csv, std::istream& proximity,
                          const PanelOptions& options) {
  if (options.proximity == ProximityFormat::distance_matrix && !options.distance_threshold)
    throw InvalidArgument("a distance matrix needs an explicit distance_threshold");

  // Outcome.
  const Table out = read_table(outcome_csv, "outcome");
  expect_header(out, {"unit", "wave", "y"}, "outcome");
  if (out.header.size() != 3) throw ParseError("outcome: expected exactly unit,wave,y", 1);

  std::vector<std::string> units;
  std::unordered_map<std::string, int> index;
  std::set<long> wave_set;
  std::map<std::pair<int, long>, int> observed;
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    const auto& row = out.rows[r];
    auto [it, fresh] = index.try_emplace(row[0], static_cast<int>(units.size()));
    if (fresh) units.push_back(row[0]);
    const long wave = to_wave(row[1], out.lines[r]);
    wave_set.insert(wave);
    if (is_missing(row[2])) continue;
    if (row[2] != "0" && row[2] != "1")
      throw ValidationError("outcome line " + std::to_string(out.lines[r]) + ": y must be 0 or 1, got '" + row[2] +
                            "'");
    if (!observed.emplace(std::make_pair(it->second, wave), row[2] == "1").second)
      throw ValidationError("outcome line " + std::to_string(out.lines[r]) + ": duplicate unit '" + row[0] +
                            "' wave " + row[1]);
  }
  if (units.empty()) throw ValidationError("outcome: no rows");
  const std::vector<long> waves(wave_set.begin(), wave_set.end());
  const int n = static_cast<int>(units.size());
  const auto T = waves.size();

  std::string gaps;
  int gap_count = 0;
  std::vector<BinaryVector> outcome(T, BinaryVector(static_cast<std::size_t>(n), 0));
  for (std::size_t t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      const auto it = observed.find({i, waves[t]});
      if (it == observed.end()) {
        if (gap_count++ < 10) gaps += (gaps.empty() ? "" : ", ") + units[static_cast<std::size_t>(i)] + "/" +
                                      std::to_string(waves[t]);
        continue;
      }
      outcome[t][static_cast<std::size_t>(i)] = it->second;
    }
  if (gap_count > 0)
    throw ValidationError("outcome missing for " + std::to_string(gap_count) + " unit/wave cell(s): " + gaps +
                          (gap_count > 10 ? ", ..." : ""));

  // Covariates.
  const Table cov = read_table(covariates_csv, "covariates");
  expect_header(cov, {"unit", "wave"}, "covariates");
  const std::vector<std::string> names(cov.header.begin() + 2, cov.header.end());
  const auto k = names.size();
  // values[c][i][t]
  std::vector<std::vector<std::vector<double>>> values(
      k, std::vector<std::vector<double>>(static_cast<std::size_t>(n), std::vector<double>(T, kNaN)));
  std::set<std::pair<int, long>> seen_rows;
  for (std::size_t r = 0; r < cov.rows.size(); ++r) {
    const auto& row = cov.rows[r];
    const auto it = index.find(row[0]);
    if (it == index.end())
      throw ValidationError("covariates line " + std::to_string(cov.lines[r]) + ": unit '" + row[0] +
                            "' is not in the outcome panel");
    const long wave = to_wave(row[1], cov.lines[r]);
    const auto w = std::lower_bound(waves.begin(), waves.end(), wave);
    if (w == waves.end() || *w != wave)
      throw ValidationError("covariates line " + std::to_string(cov.lines[r]) + ": wave " + row[1] +
                            " is not in the outcome panel");
    if (!seen_rows.insert({it->second, wave}).second)
      throw ValidationError("covariates line " + std::to_string(cov.lines[r]) + ": duplicate unit '" + row[0] +
                            "' wave " + row[1]);
    const auto t = static_cast<std::size_t>(w - waves.begin());
    for (std::size_t c = 0; c < k; ++c)
      if (!is_missing(row[c + 2]))
        values[c][static_cast<std::size_t>(it->second)][t] = to_real(row[c + 2], cov.lines[r], "covariates");
  }
  std::vector<double> at(waves.begin(), waves.end());
  std::vector<Eigen::MatrixXd> covariates(T, Eigen::MatrixXd(n, static_cast<Eigen::Index>(k)));
  for (std::size_t c = 0; c < k; ++c) {
    double sum = 0.0;
    long count = 0;
    for (const auto& series : values[c])
      for (double v : series)
        if (!std::isnan(v)) {
          sum += v;
          ++count;
        }
    if (count == 0) throw ValidationError("covariate '" + names[c] + "' is never observed");
    const double mean = sum / static_cast<double>(count);
    for (int i = 0; i < n; ++i) {
      auto& series = values[c][static_cast<std::size_t>(i)];
      interpolate_series(series, at);
      for (std::size_t t = 0; t < T; ++t)
        covariates[t](i, static_cast<Eigen::Index>(c)) = std::isnan(series[t]) ? mean : series[t];
    }
  }

  // Proximity.
  Eigen::MatrixXd adjacency = options.proximity == ProximityFormat::edge_list
                                  ? read_edge_list(proximity, index)
                                  : read_distance_matrix(proximity, index, *options.distance_threshold);

  return PanelDataset{std::move(units),       std::move(waves),      std::move(outcome),
                      std::vector<std::string>(names), std::move(covariates), Network(std::move(adjacency))};
}

PanelDataset ingest_panel(const std::filesystem::path& outcome_csv, const std::filesystem::path& covariates_csv,
                          const std::filesystem::path& proximity, const PanelOptions& options) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw InvalidArgument("cannot open " + p.string());
    return in;
  };
  std::ifstream a = open(outcome_csv), b = open(covariates_csv), c = open(proximity);
  return ingest_panel(a, b, c, options);
}

}  // namespace netdiff
