#pragma once

#include <optional>
#include <string>
#include <vector>

namespace hypernoise {

/// Header plus rows of a comma-separated file (no quoting; fields never contain commas).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, if present.
  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;
};

/// Line chart with one labelled polyline per series. Output depends only on the inputs.
std::string svg_curve(const std::vector<Series>& series, const std::string& x_label, const std::string& y_label,
                      const std::string& title);
/// Bar chart with symmetric error whiskers.
std::string svg_bars(const std::vector<Bar>& bars, const std::string& y_label, const std::string& title);

enum class PlotKind { Curve, Bars };

PlotKind plot_kind_from_string(const std::string& name);

/// Renders a CSV file. Curves need a `method` column plus the x and y columns
/// (default step and reward_mean) and draw one series per method. Bars need
/// label, value and error columns. Schema mismatches and empty data raise SchemaError.
std::string plot_csv(const std::string& csv_text, PlotKind kind, const std::string& x_column = "step",
                     const std::string& y_column = "reward_mean", const std::string& title = "");

}  // namespace hypernoise
