#include "netdiff/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "netdiff/error.hpp"
#include "netdiff/mc.hpp"

namespace netdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double real(const std::string& s) {
  if (s == "NA" || s.empty()) return kNaN;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", 0);
  return v;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string comment_safe(std::string s) {
  for (std::size_t p = s.find("--"); p != std::string::npos; p = s.find("--")) s.replace(p, 2, "- -");
  return s;
}

const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2a9d8f", "#edae49", "#6a4c93", "#4d4d4d"};

// Round-number tick spacing covering [lo, hi] with about five ticks.
double tick_step(double lo, double hi) {
  const double span = std::max(hi - lo, 1e-9);
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ValidationError("table has no column '" + name + "'");
  return static_cast<int>(it - columns.begin());
}

CsvTable read_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.columns.empty() && t.provenance.empty()) t.provenance = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
      continue;
    }
    auto fields = split(line);
    if (t.columns.empty()) {
      t.columns = std::move(fields);
    } else if (fields.size() != t.columns.size()) {
      throw ParseError("expected " + std::to_string(t.columns.size()) + " fields", line_no);
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.columns.empty()) throw ParseError("missing header", line_no);
  return t;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return read_csv_table(in);
  } catch (const ParseError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string render_svg(const std::string& title, const std::vector<PlotPanel>& panels,
                       const std::vector<std::string>& comments) {
  const double pw = 360, ph = 300, ml = 56, mr = 14, mt = 56, mb = 78;
  const double width = std::max<double>(1, panels.size()) * pw;
  const double height = ph;
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  for (const auto& c : comments) s << "<!-- " << comment_safe(c) << " -->\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PlotPanel& panel = panels[p];
    const double x0 = static_cast<double>(p) * pw + ml, x1 = static_cast<double>(p + 1) * pw - mr;
    const double y0 = ph - mb, y1 = mt;

    std::set<double> xs;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& ser : panel.series)
      for (std::size_t k = 0; k < ser.x.size(); ++k) {
        if (std::isnan(ser.y[k])) continue;
        xs.insert(ser.x[k]);
        const double e = ser.err.empty() || std::isnan(ser.err[k]) ? 0.0 : ser.err[k];
        lo = std::min(lo, ser.y[k] - e);
        hi = std::max(hi, ser.y[k] + e);
      }
    if (panel.y_range) std::tie(lo, hi) = *panel.y_range;
    if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0.0, hi = 1.0;
    if (panel.bars) lo = std::min(lo, 0.0);
    if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
    const double step = tick_step(lo, hi);
    lo = std::floor(lo / step) * step;
    hi = std::ceil(hi / step) * step;

    const std::vector<double> xv(xs.begin(), xs.end());
    const double xmin = xv.empty() ? -1.0 : xv.front(), xmax = xv.empty() ? 1.0 : xv.back();
    auto sx_value = [&](double x) {
      const double span = xmax - xmin;
      if (span <= 0.0) return (x0 + x1) / 2;
      const double inset = 0.05 * (x1 - x0);
      return x0 + inset + (x - xmin) / span * (x1 - x0 - 2 * inset);
    };
    auto sx_index = [&](std::size_t i) { return x0 + (static_cast<double>(i) + 0.5) / xv.size() * (x1 - x0); };
    auto sy = [&](double y) { return y0 - (y - lo) / (hi - lo) * (y0 - y1); };

    s << "<g>\n";
    s << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(y1 - 10) << "\" text-anchor=\"middle\">"
      << escape(panel.title) << "</text>\n";
    s << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
      << num(y0 - y1) << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (double t = lo; t <= hi + step * 1e-6; t += step) {
      s << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << num(x1) << "\" y2=\""
        << num(sy(t)) << "\" stroke=\"#eee\"/>\n";
      s << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">" << num(t)
        << "</text>\n";
    }
    if (lo < 0.0 && hi > 0.0)
      s << "<line x1=\"" << num(x0) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(sy(0))
        << "\" stroke=\"#666\" stroke-dasharray=\"3,3\"/>\n";
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double px = panel.bars ? sx_index(i) : sx_value(xv[i]);
      s << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 14) << "\" text-anchor=\"middle\">" << num(xv[i])
        << "</text>\n";
    }
    s << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(y0 + 30) << "\" text-anchor=\"middle\">"
      << escape(panel.x_label) << "</text>\n";
    s << "<text transform=\"translate(" << num(x0 - 42) << ',' << num((y0 + y1) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(panel.y_label) << "</text>\n";

    const std::size_t ns = panel.series.size();
    for (std::size_t k = 0; k < ns; ++k) {
      const PlotSeries& ser = panel.series[k];
      const char* colour = kPalette[k % std::size(kPalette)];
      if (panel.bars) {
        const double slot = (x1 - x0) / std::max<std::size_t>(1, xv.size());
        const double bw = slot * 0.8 / std::max<std::size_t>(1, ns);
        for (std::size_t m = 0; m < ser.x.size(); ++m) {
          if (std::isnan(ser.y[m])) continue;
          const auto i = static_cast<std::size_t>(std::lower_bound(xv.begin(), xv.end(), ser.x[m]) - xv.begin());
          const double bx = sx_index(i) - slot * 0.4 + static_cast<double>(k) * bw;
          const double top = sy(std::max(ser.y[m], 0.0)), bottom = sy(std::min(ser.y[m], 0.0));
          s << "<rect x=\"" << num(bx) << "\" y=\"" << num(top) << "\" width=\"" << num(bw) << "\" height=\""
            << num(bottom - top) << "\" fill=\"" << colour << "\"/>\n";
        }
      } else {
        std::string points;
        for (std::size_t m = 0; m < ser.x.size(); ++m) {
          if (std::isnan(ser.y[m])) continue;
          const double px = sx_value(ser.x[m]) + (static_cast<double>(k) - (ns - 1) / 2.0) * 3.0;
          points += (points.empty() ? "" : " ") + num(px) + "," + num(sy(ser.y[m]));
          if (!ser.err.empty() && !std::isnan(ser.err[m]))
            s << "<line x1=\"" << num(px) << "\" y1=\"" << num(sy(ser.y[m] - ser.err[m])) << "\" x2=\"" << num(px)
              << "\" y2=\"" << num(sy(ser.y[m] + ser.err[m])) << "\" stroke=\"" << colour << "\"/>\n";
          s << "<circle cx=\"" << num(px) << "\" cy=\"" << num(sy(ser.y[m])) << "\" r=\"2.5\" fill=\"" << colour
            << "\"/>\n";
        }
        if (!points.empty())
          s << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << colour << "\"/>\n";
      }
      const double ly = y0 + 46 + static_cast<double>(k / 3) * 13;
      const double lx = x0 + static_cast<double>(k % 3) * (x1 - x0) / 3;
      s << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"9\" height=\"9\" fill=\"" << colour
        << "\"/>\n";
      s << "<text x=\"" << num(lx + 13) << "\" y=\"" << num(ly) << "\">" << escape(ser.label) << "</text>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

const std::vector<std::string>& report_files() {
  static const std::vector<std::string> files{"fig_convergence.svg", "fig_spatial.svg", "fig_slope.svg",
                                              "fig_significance.svg", "fig_slope_significance.svg"};
  return files;
}

namespace {

struct LongRow {
  double rho;
  int n;
  std::string estimator;
  std::vector<double> values;
};

std::vector<LongRow> long_rows(const CsvTable& t, const std::vector<std::string>& value_columns) {
  const int ci = t.column("rho"), cn = t.column("n"), ce = t.column("estimator");
  std::vector<int> cv;
  for (const auto& c : value_columns) cv.push_back(t.column(c));
  std::vector<LongRow> out;
  for (const auto& r : t.rows) {
    LongRow row{real(r[static_cast<std::size_t>(ci)]), std::stoi(r[static_cast<std::size_t>(cn)]),
                r[static_cast<std::size_t>(ce)], {}};
    for (int c : cv) row.values.push_back(real(r[static_cast<std::size_t>(c)]));
    out.push_back(std::move(row));
  }
  return out;
}

// One panel per estimator (in first-seen order), one series per n.
std::vector<PlotPanel> panels_by_estimator(const std::vector<LongRow>& rows, std::size_t value, int err,
                                           const std::string& y_label, bool bars,
                                           std::optional<std::pair<double, double>> range,
                                           const std::set<std::string>& only = {}) {
  std::vector<std::string> estimators;
  std::set<int> ns;
  for (const auto& r : rows) {
    if (!only.empty() && !only.count(r.estimator)) continue;
    if (std::find(estimators.begin(), estimators.end(), r.estimator) == estimators.end())
      estimators.push_back(r.estimator);
    ns.insert(r.n);
  }
  std::vector<PlotPanel> panels;
  for (const auto& e : estimators) {
    PlotPanel panel{e, "rho", y_label, {}, bars, range};
    for (int n : ns) {
      PlotSeries ser{"n=" + std::to_string(n), {}, {}, {}};
      for (const auto& r : rows) {
        if (r.estimator != e || r.n != n) continue;
        ser.x.push_back(r.rho);
        ser.y.push_back(r.values[value]);
        if (err >= 0) ser.err.push_back(r.values[static_cast<std::size_t>(err)]);
      }
      if (!ser.x.empty()) panel.series.push_back(std::move(ser));
    }
    panels.push_back(std::move(panel));
  }
  return panels;
}

}  // namespace

std::vector<std::filesystem::path> render_report(const std::filesystem::path& input_dir,
                                                 const std::filesystem::path& out_dir,
                                                 const std::string& header_comment) {
  const CsvTable counts = read_csv_table(input_dir / kCountsFile);
  const CsvTable spatial = read_csv_table(input_dir / kSpatialFile);
  const CsvTable slope = read_csv_table(input_dir / kSlopeFile);
  const CsvTable sig = read_csv_table(input_dir / kSignificanceFile);

  std::filesystem::create_directories(out_dir);
  auto comments = [&](const CsvTable& src) {
    std::vector<std::string> c{header_comment};
    if (!src.provenance.empty()) c.push_back("source " + src.provenance);
    return c;
  };

  const auto count_rows = long_rows(counts, {"rate"});
  const auto spatial_rows = long_rows(spatial, {"mean", "sd"});
  const auto slope_rows = long_rows(slope, {"mean", "sd"});
  const auto sig_rows = long_rows(sig, {"spatial_sig", "slope_sig"});
  const std::pair<double, double> unit{0.0, 1.0};

  std::set<std::string> saom;
  for (const auto& r : count_rows)
    if (r.estimator != "gibbs") saom.insert(r.estimator);

  const std::vector<std::pair<std::string, std::string>> figures{
      {report_files()[0],
       render_svg("Share of SAOM fits kept after the convergence filter",
                  panels_by_estimator(count_rows, 0, -1, "accepted share", true, unit, saom), comments(counts))},
      {report_files()[1], render_svg("Spatial estimate by rho (mean +/- sd over accepted fits)",
                                     panels_by_estimator(spatial_rows, 0, 1, "estimate", false, std::nullopt),
                                     comments(spatial))},
      {report_files()[2], render_svg("Slope estimate by rho (mean +/- sd over accepted fits)",
                                     panels_by_estimator(slope_rows, 0, 1, "estimate", false, std::nullopt),
                                     comments(slope))},
      {report_files()[3], render_svg("Share of significant spatial tests",
                                     panels_by_estimator(sig_rows, 0, -1, "share significant", false, unit),
                                     comments(sig))},
      {report_files()[4], render_svg("Share of significant slope tests",
                                     panels_by_estimator(sig_rows, 1, -1, "share significant", false, unit),
                                     comments(sig))},
  };

  std::vector<std::filesystem::path> written;
  for (const auto& [name, svg] : figures) {
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << svg;
    written.push_back(path);
  }
  return written;
}

}  // namespace netdiff
