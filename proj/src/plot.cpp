#include "hypernoise/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hypernoise/errors.hpp"

namespace hypernoise {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
}

void axes(std::ostringstream& out, Range xr, Range yr, const std::string& x_label, const std::string& y_label,
          bool x_ticks) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  out << "<line x1=\"" << fixed(x0) << "\" y1=\"" << fixed(y0) << "\" x2=\"" << fixed(x1) << "\" y2=\"" << fixed(y0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fixed(x0) << "\" y1=\"" << fixed(y0) << "\" x2=\"" << fixed(x0) << "\" y2=\"" << fixed(y1)
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double py = y0 + f * (y1 - y0);
    out << "<line x1=\"" << fixed(x0 - 4) << "\" y1=\"" << fixed(py) << "\" x2=\"" << fixed(x0) << "\" y2=\""
        << fixed(py) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fixed(x0 - 6) << "\" y=\"" << fixed(py + 4) << "\" text-anchor=\"end\">"
        << tick(yr.lo + f * (yr.hi - yr.lo)) << "</text>\n";
    if (x_ticks) {
      const double px = x0 + f * (x1 - x0);
      out << "<line x1=\"" << fixed(px) << "\" y1=\"" << fixed(y0) << "\" x2=\"" << fixed(px) << "\" y2=\""
          << fixed(y0 + 4) << "\" stroke=\"black\"/>\n";
      out << "<text x=\"" << fixed(px) << "\" y=\"" << fixed(y0 + 16) << "\" text-anchor=\"middle\">"
          << tick(xr.lo + f * (xr.hi - xr.lo)) << "</text>\n";
    }
  }
  out << "<text x=\"" << fixed((x0 + x1) / 2) << "\" y=\"" << fixed(kHeight - 12)
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << fixed((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fixed((y0 + y1) / 2) << ")\">" << escape(y_label) << "</text>\n";
}

double parse_cell(const std::string& text, const std::string& column, std::size_t row) {
  if (text == "nan") return std::nan("");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw SchemaError("column '" + column + "' row " + std::to_string(row + 1) + ": '" + text + "' is not a number");
  return v;
}

std::string joined_header(const CsvTable& table) {
  std::string h;
  for (std::size_t i = 0; i < table.header.size(); ++i) h += (i ? "," : "") + table.header[i];
  return h;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw SchemaError("csv row " + std::to_string(table.rows.size() + 1) + " has " + std::to_string(fields.size()) +
                          " fields, header has " + std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

std::string svg_curve(const std::vector<Series>& series, const std::string& x_label, const std::string& y_label,
                      const std::string& title) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) throw SchemaError("curve plot: no finite data points");
  const Range xr = padded(xlo, xhi), yr = padded(ylo, yhi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
  auto py = [&](double v) { return y0 + (v - yr.lo) / (yr.hi - yr.lo) * (y1 - y0); };

  std::ostringstream out;
  header(out, title);
  axes(out, xr, yr, x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!points.empty()) points += ' ';
      points += fixed(px(s.x[i])) + "," + fixed(py(s.y[i]));
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i])) << "\" r=\"2\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 14.0 + 16.0 * double(k);
    out << "<line x1=\"" << fixed(x1 + 12) << "\" y1=\"" << fixed(ly - 4) << "\" x2=\"" << fixed(x1 + 32)
        << "\" y2=\"" << fixed(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fixed(x1 + 36) << "\" y=\"" << fixed(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_bars(const std::vector<Bar>& bars, const std::string& y_label, const std::string& title) {
  if (bars.empty()) throw SchemaError("bar plot: no data rows");
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bars) {
    lo = std::min(lo, b.value - std::abs(b.error));
    hi = std::max(hi, b.value + std::abs(b.error));
  }
  const Range yr = padded(lo, hi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto py = [&](double v) { return y0 + (v - yr.lo) / (yr.hi - yr.lo) * (y1 - y0); };
  const double slot = (x1 - x0) / double(bars.size());

  std::ostringstream out;
  header(out, title);
  axes(out, {0.0, 1.0}, yr, "", y_label, false);
  for (std::size_t k = 0; k < bars.size(); ++k) {
    const auto& b = bars[k];
    const char* color = kPalette[k % std::size(kPalette)];
    const double left = x0 + slot * (double(k) + 0.2);
    const double w = slot * 0.6;
    const double top = py(std::max(b.value, 0.0)), bottom = py(std::min(b.value, 0.0));
    out << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(w) << "\" height=\""
        << fixed(bottom - top) << "\" fill=\"" << color << "\"/>\n";
    const double mid = left + w / 2;
    out << "<line x1=\"" << fixed(mid) << "\" y1=\"" << fixed(py(b.value - std::abs(b.error))) << "\" x2=\""
        << fixed(mid) << "\" y2=\"" << fixed(py(b.value + std::abs(b.error))) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fixed(mid) << "\" y=\"" << fixed(y0 + 16) << "\" text-anchor=\"middle\">"
        << escape(b.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

PlotKind plot_kind_from_string(const std::string& name) {
  if (name == "curve") return PlotKind::Curve;
  if (name == "bars") return PlotKind::Bars;
  throw ConfigError("unknown plot kind '" + name + "' (expected curve, bars)");
}

std::string plot_csv(const std::string& csv_text, PlotKind kind, const std::string& x_column,
                     const std::string& y_column, const std::string& title) {
  const CsvTable table = parse_csv(csv_text);
  if (kind == PlotKind::Curve) {
    const auto m = table.column("method"), x = table.column(x_column), y = table.column(y_column);
    if (!m || !x || !y)
      throw SchemaError("curve plot expects columns method," + x_column + "," + y_column + "; got '" +
                        joined_header(table) + "'");
    if (table.rows.empty()) throw SchemaError("curve plot: no data rows");
    std::vector<Series> series;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.label == row[*m]; });
      if (it == series.end()) {
        series.push_back({row[*m], {}, {}});
        it = series.end() - 1;
      }
      it->x.push_back(parse_cell(row[*x], x_column, r));
      it->y.push_back(parse_cell(row[*y], y_column, r));
    }
    return svg_curve(series, x_column, y_column, title);
  }
  const auto l = table.column("label"), v = table.column("value"), e = table.column("error");
  if (!l || !v || !e) throw SchemaError("bars plot expects columns label,value,error; got '" + joined_header(table) + "'");
  if (table.rows.empty()) throw SchemaError("bars plot: no data rows");
  const auto cond = table.column("condition");
  std::vector<Bar> bars;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string label = row[*l];
    if (cond && row[*cond] != "all") label = row[*cond] + ":" + label;
    bars.push_back({label, parse_cell(row[*v], "value", r), parse_cell(row[*e], "error", r)});
  }
  return svg_bars(bars, "value", title);
}

}  // namespace hypernoise
