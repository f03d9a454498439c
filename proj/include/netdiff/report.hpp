#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace netdiff {

/// A comma-separated table with an optional leading "# ..." provenance line.
struct CsvTable {
  std::string provenance;  // text after "# ", empty when absent
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws when absent
};

CsvTable read_csv_table(std::istream& in);
CsvTable read_csv_table(const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // half-width of an error bar, empty for none
};

struct PlotPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool bars = false;  // grouped bars at each x instead of lines
  std::optional<std::pair<double, double>> y_range;
};

/// Renders panels side by side. Numbers are printed with fixed precision so
/// identical input gives identical bytes.
std::string render_svg(const std::string& title, const std::vector<PlotPanel>& panels,
                       const std::vector<std::string>& comments);

/// File names `render_report` writes, in order.
const std::vector<std::string>& report_files();

/// Reads the four summary CSVs in `input_dir` and writes one SVG per figure
/// into `out_dir`: convergence rates, spatial estimates, slope estimates,
/// spatial and slope significance. Only plots what the tables contain.
std::vector<std::filesystem::path> render_report(const std::filesystem::path& input_dir,
                                                 const std::filesystem::path& out_dir,
                                                 const std::string& header_comment);

}  // namespace netdiff
