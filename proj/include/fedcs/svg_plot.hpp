#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedcs/text_io.hpp"

namespace fedcs {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column '" + name + "' not found");
  }
};

inline CsvTable parse_csv_text(const std::string& text) {
  CsvTable table;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t fpos = 0;
    while (true) {
      std::size_t comma = line.find(',', fpos);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(fpos));
        break;
      }
      fields.push_back(line.substr(fpos, comma - fpos));
      fpos = comma + 1;
    }
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw std::runtime_error("csv row has " + std::to_string(fields.size()) +
                                 " fields, header has " +
                                 std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw std::runtime_error("csv text is empty");
  return table;
}

inline CsvTable load_csv_file(const std::string& path) {
  return parse_csv_text(read_file(path));
}

struct PlotSpec {
  std::string x_col;
  std::string y_col;
  std::string series_col;  // empty = single unnamed series
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 440;
};

namespace detail {

inline double parse_plot_number(const std::string& s, const std::string& col) {
  double v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("csv column '" + col + "' has non-numeric value '" +
                             s + "'");
  return v;
}

// Fixed two decimals keeps the output stable across runs and platforms.
inline std::string svg_coord(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

inline void xml_escape_append(std::string& out, const std::string& s) {
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
}

inline const std::vector<std::string>& plot_palette() {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return colors;
}

}  // namespace detail

// Renders one polyline per series. Rows keep their file order inside a
// series, and series keep first-appearance order, so equal inputs give
// byte-equal output.
inline std::string render_svg_text(const CsvTable& table, const PlotSpec& spec) {
  if (spec.width < 160 || spec.height < 120)
    throw std::invalid_argument("plot canvas too small");
  const int xc = table.column(spec.x_col);
  const int yc = table.column(spec.y_col);
  const int sc = spec.series_col.empty() ? -1 : table.column(spec.series_col);

  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };
  std::vector<Series> series;
  for (const auto& row : table.rows) {
    const std::string name = sc < 0 ? "" : row[sc];
    Series* s = nullptr;
    for (auto& cand : series)
      if (cand.name == name) s = &cand;
    if (!s) {
      series.push_back({name, {}, {}});
      s = &series.back();
    }
    s->xs.push_back(detail::parse_plot_number(row[xc], spec.x_col));
    s->ys.push_back(detail::parse_plot_number(row[yc], spec.y_col));
  }
  if (series.empty()) throw std::runtime_error("nothing to plot");

  double x_min = series[0].xs[0], x_max = x_min;
  double y_min = series[0].ys[0], y_max = y_min;
  for (const auto& s : series) {
    for (double v : s.xs) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
    for (double v : s.ys) {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  auto widen = [](double& lo, double& hi) {
    const double span = hi - lo;
    if (span <= 0.0) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      lo -= 0.05 * span;
      hi += 0.05 * span;
    }
  };
  widen(x_min, x_max);
  widen(y_min, y_max);

  const double left = 64, right = spec.width - 20;
  const double top = 34, bottom = spec.height - 48;
  auto px = [&](double x) {
    return left + (x - x_min) / (x_max - x_min) * (right - left);
  };
  auto py = [&](double y) {
    return bottom - (y - y_min) / (y_max - y_min) * (bottom - top);
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(spec.width) + "\" height=\"" +
         std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) +
         "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  const int ticks = 5;
  out += "<g stroke=\"#d0d0d0\" stroke-width=\"1\">\n";
  for (int i = 0; i < ticks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / (ticks - 1);
    const double fy = y_min + (y_max - y_min) * i / (ticks - 1);
    out += "<line x1=\"" + detail::svg_coord(px(fx)) + "\" y1=\"" +
           detail::svg_coord(top) + "\" x2=\"" + detail::svg_coord(px(fx)) +
           "\" y2=\"" + detail::svg_coord(bottom) + "\"/>\n";
    out += "<line x1=\"" + detail::svg_coord(left) + "\" y1=\"" +
           detail::svg_coord(py(fy)) + "\" x2=\"" + detail::svg_coord(right) +
           "\" y2=\"" + detail::svg_coord(py(fy)) + "\"/>\n";
  }
  out += "</g>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  for (int i = 0; i < ticks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / (ticks - 1);
    const double fy = y_min + (y_max - y_min) * i / (ticks - 1);
    out += "<text x=\"" + detail::svg_coord(px(fx)) + "\" y=\"" +
           detail::svg_coord(bottom + 16) + "\" text-anchor=\"middle\">" +
           detail::svg_coord(fx) + "</text>\n";
    out += "<text x=\"" + detail::svg_coord(left - 6) + "\" y=\"" +
           detail::svg_coord(py(fy) + 4) + "\" text-anchor=\"end\">" +
           detail::svg_coord(fy) + "</text>\n";
  }
  out += "</g>\n";

  out += "<g font-family=\"sans-serif\" font-size=\"13\" fill=\"#000000\">\n";
  out += "<text x=\"" + detail::svg_coord((left + right) / 2) + "\" y=\"20\" " +
         "text-anchor=\"middle\" font-weight=\"bold\">";
  detail::xml_escape_append(out, spec.title);
  out += "</text>\n";
  out += "<text x=\"" + detail::svg_coord((left + right) / 2) + "\" y=\"" +
         detail::svg_coord(spec.height - 10) + "\" text-anchor=\"middle\">";
  detail::xml_escape_append(out, spec.x_label.empty() ? spec.x_col : spec.x_label);
  out += "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::svg_coord((top + bottom) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::svg_coord((top + bottom) / 2) + ")\">";
  detail::xml_escape_append(out, spec.y_label.empty() ? spec.y_col : spec.y_label);
  out += "</text>\n";
  out += "</g>\n";

  const auto& palette = detail::plot_palette();
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string& color = palette[si % palette.size()];
    out += "<polyline fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (i) out += ' ';
      out += detail::svg_coord(px(s.xs[i])) + "," + detail::svg_coord(py(s.ys[i]));
    }
    out += "\"/>\n";
    for (std::size_t i = 0; i < s.xs.size(); ++i)
      out += "<circle cx=\"" + detail::svg_coord(px(s.xs[i])) + "\" cy=\"" +
             detail::svg_coord(py(s.ys[i])) + "\" r=\"2.5\" fill=\"" + color +
             "\"/>\n";
  }

  if (!(series.size() == 1 && series[0].name.empty())) {
    out += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
      const double y = top + 8 + 16 * static_cast<double>(si);
      out += "<rect x=\"" + detail::svg_coord(right - 110) + "\" y=\"" +
             detail::svg_coord(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
             palette[si % palette.size()] + "\"/>\n";
      out += "<text x=\"" + detail::svg_coord(right - 96) + "\" y=\"" +
             detail::svg_coord(y) + "\">";
      detail::xml_escape_append(out, series[si].name);
      out += "</text>\n";
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void render_svg_file(const std::string& csv_path, const PlotSpec& spec,
                            const std::string& out_path) {
  write_file(out_path, render_svg_text(load_csv_file(csv_path), spec));
}

}  // namespace fedcs
