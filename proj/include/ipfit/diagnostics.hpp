#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ipfit/csv.hpp"
#include "ipfit/doe.hpp"
#include "ipfit/errors.hpp"
#include "ipfit/ipm.hpp"
#include "ipfit/stats.hpp"

// Model-adequacy and design-diagnostic plot data: QQ coordinates, residual
// scatters, variance-function profiles; CSV and deterministic SVG emission.

namespace ipfit::diagnostics {

enum class SeriesKind { scatter, line };

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  SeriesKind kind = SeriesKind::scatter;
  std::pair<std::string, std::string> axis_labels;

  void validate() const {
    if (points.empty()) throw std::invalid_argument("plot series '" + name + "' is empty");
    for (const auto& [x, y] : points)
      if (!std::isfinite(x) || !std::isfinite(y))
        throw std::invalid_argument("plot series '" + name + "' has non-finite point");
  }
};

struct QqPlot {
  PlotSeries points;     // (normal quantile, standardized residual)
  PlotSeries reference;  // identity line across the quantile range
  bool degenerate_variance = false;
};

// Sorted residuals standardized by their mean and 1/n standard deviation,
// paired against normal quantiles at p_i = (i - 0.5)/n.
inline QqPlot qq_normal(const std::vector<double>& residuals) {
  const auto n = residuals.size();
  if (n < 1) throw std::invalid_argument("qq_normal: need at least one residual");
  std::vector<double> sorted = residuals;
  std::sort(sorted.begin(), sorted.end());
  const double m = stats::mean(sorted);
  const double s = stats::sd_population(sorted);

  QqPlot qq;
  qq.degenerate_variance = !(s > 0.0);
  qq.points.name = "qq";
  qq.points.kind = SeriesKind::scatter;
  qq.points.axis_labels = {"theoretical quantile", "standardized residual"};
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double z = stats::normal_quantile(p);
    const double y = qq.degenerate_variance ? 0.0 : (sorted[i] - m) / s;
    qq.points.points.emplace_back(z, y);
  }
  const double lo = qq.points.points.front().first;
  const double hi = qq.points.points.back().first;
  qq.reference.name = "identity";
  qq.reference.kind = SeriesKind::line;
  qq.reference.axis_labels = qq.points.axis_labels;
  qq.reference.points = {{lo, lo}, {hi, hi}};
  return qq;
}

struct PredictorResiduals {
  PlotSeries series;
  double correlation = 0.0;  // Pearson; 0 under zero variance
};

inline std::vector<PredictorResiduals> residual_vs_predictor(
    const ipm::Dataset& data, const std::vector<double>& residuals) {
  if (static_cast<int>(residuals.size()) != data.n())
    throw std::invalid_argument("residual_vs_predictor: length mismatch");
  std::vector<PredictorResiduals> out;
  for (int which = 0; which < 2; ++which) {
    const Eigen::VectorXd& x = which == 0 ? data.x1 : data.x2;
    PredictorResiduals pr;
    pr.series.name = which == 0 ? "x1" : "x2";
    pr.series.kind = SeriesKind::scatter;
    pr.series.axis_labels = {pr.series.name, "residual"};
    std::vector<double> xv(static_cast<std::size_t>(data.n()));
    for (int i = 0; i < data.n(); ++i) {
      xv[static_cast<std::size_t>(i)] = x(i);
      pr.series.points.emplace_back(x(i), residuals[static_cast<std::size_t>(i)]);
    }
    pr.correlation = stats::pearson(xv, residuals);
    out.push_back(std::move(pr));
  }
  return out;
}

// One line series per direction: (r, scaled variance at r*d).
inline std::vector<PlotSeries> varfcn_profile(const doe::ModelMatrix& m,
                                              const std::vector<std::vector<double>>& directions,
                                              const std::vector<double>& radii) {
  if (directions.empty() || radii.empty())
    throw std::invalid_argument("varfcn_profile: need directions and radii");
  std::vector<PlotSeries> out;
  int tag = 0;
  for (const auto& d : directions) {
    if (static_cast<int>(d.size()) != m.k)
      throw std::invalid_argument("varfcn_profile: direction dimension mismatch");
    double norm2 = 0.0;
    for (double v : d) norm2 += v * v;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-8)
      throw std::invalid_argument("varfcn_profile: directions must be unit vectors");
    PlotSeries s;
    s.name = "profile" + std::to_string(++tag);
    s.kind = SeriesKind::line;
    s.axis_labels = {"distance from centre", "scaled prediction variance"};
    for (double r : radii) {
      std::vector<double> x(d.size());
      for (std::size_t j = 0; j < d.size(); ++j) x[j] = r * d[j];
      s.points.emplace_back(r, doe::scaled_prediction_variance(m, x));
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct ContourGrid {
  int n = 0;                                    // points per axis
  std::vector<std::array<double, 3>> rows;      // (x1, x2, scaled_variance)
};

// Square grid over [-extent, extent]^2 for the circular-contour check (k=2).
inline ContourGrid varfcn_contour(const doe::ModelMatrix& m, double extent, int n = 41) {
  if (m.k != 2) throw std::invalid_argument("varfcn_contour: k=2 designs only");
  if (!(extent > 0.0)) throw std::invalid_argument("varfcn_contour: extent must be > 0");
  if (n < 2) throw std::invalid_argument("varfcn_contour: n must be >= 2");
  ContourGrid g;
  g.n = n;
  g.rows.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x1 = -extent + 2.0 * extent * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double x2 = -extent + 2.0 * extent * j / (n - 1);
      g.rows.push_back({x1, x2, doe::scaled_prediction_variance(m, {x1, x2})});
    }
  }
  return g;
}

// Plot-data CSV, header (series, x, y), shortest-roundtrip floats.
inline void write_plot_csv(const std::string& path, const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("write_plot_csv: nothing to write");
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : series) {
    s.validate();
    for (const auto& [x, y] : s.points)
      rows.push_back({s.name, csv::format_double(x), csv::format_double(y)});
  }
  csv::write_table(path, {"series", "x", "y"}, rows);
}

inline void write_contour_csv(const std::string& path, const ContourGrid& grid) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(grid.rows.size());
  for (const auto& r : grid.rows)
    rows.push_back({csv::format_double(r[0]), csv::format_double(r[1]),
                    csv::format_double(r[2])});
  csv::write_table(path, {"x1", "x2", "scaled_variance"}, rows);
}

namespace detail {

inline const char* series_color(std::size_t i) {
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};
  return palette[i % 6];
}

}  // namespace detail

// Standalone 800x600 SVG; byte-identical output for identical input.
inline void render_svg(const std::vector<PlotSeries>& series, const std::string& path) {
  if (series.empty()) throw std::invalid_argument("render_svg: empty series list");
  for (const auto& s : series) s.validate();

  double xmin = series[0].points[0].first, xmax = xmin;
  double ymin = series[0].points[0].second, ymax = ymin;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  // 5% margins; degenerate spans padded to unit width.
  const auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    if (span > 0.0) {
      lo -= 0.05 * span;
      hi += 0.05 * span;
    } else {
      lo -= 1.0;
      hi += 1.0;
    }
  };
  pad(xmin, xmax);
  pad(ymin, ymax);

  constexpr double kLeft = 70.0, kRight = 780.0, kTop = 20.0, kBottom = 550.0;
  const auto sx = [&](double x) {
    return kLeft + (x - xmin) / (xmax - xmin) * (kRight - kLeft);
  };
  const auto sy = [&](double y) {
    return kBottom - (y - ymin) / (ymax - ymin) * (kBottom - kTop);
  };
  const auto num = [](double v) { return csv::format_double(v); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"#ffffff\"/>\n";
  svg += "<rect x=\"70\" y=\"20\" width=\"710\" height=\"530\" fill=\"none\" "
         "stroke=\"#000000\" stroke-width=\"1\"/>\n";

  // Ticks: five per axis at even fractions of the padded range.
  for (int t = 0; t < 5; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    svg += "<line x1=\"" + num(sx(fx)) + "\" y1=\"550\" x2=\"" + num(sx(fx)) +
           "\" y2=\"556\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + num(sx(fx)) +
           "\" y=\"570\" font-family=\"monospace\" font-size=\"11\" "
           "text-anchor=\"middle\">" + num(fx) + "</text>\n";
    svg += "<line x1=\"64\" y1=\"" + num(sy(fy)) + "\" x2=\"70\" y2=\"" + num(sy(fy)) +
           "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"60\" y=\"" + num(sy(fy) + 4.0) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" +
           num(fy) + "</text>\n";
  }
  svg += "<text x=\"425\" y=\"592\" font-family=\"monospace\" font-size=\"13\" "
         "text-anchor=\"middle\">" + series[0].axis_labels.first + "</text>\n";
  svg += "<text x=\"16\" y=\"285\" font-family=\"monospace\" font-size=\"13\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 16 285)\">" +
         series[0].axis_labels.second + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = detail::series_color(i);
    if (s.kind == SeriesKind::line) {
      svg += "<polyline fill=\"none\" stroke=\"";
      svg += color;
      svg += "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t j = 0; j < s.points.size(); ++j) {
        if (j) svg += ' ';
        svg += num(sx(s.points[j].first)) + "," + num(sy(s.points[j].second));
      }
      svg += "\"/>\n";
    } else {
      for (const auto& [x, y] : s.points) {
        svg += "<circle cx=\"" + num(sx(x)) + "\" cy=\"" + num(sy(y)) +
               "\" r=\"3\" fill=\"";
        svg += color;
        svg += "\"/>\n";
      }
    }
    // Legend entry: swatch + label, top-right inside the plot frame.
    const double ly = 36.0 + 18.0 * static_cast<double>(i);
    svg += "<rect x=\"640\" y=\"" + num(ly - 9.0) +
           "\" width=\"12\" height=\"12\" fill=\"";
    svg += color;
    svg += "\"/>\n";
    svg += "<text x=\"658\" y=\"" + num(ly + 2.0) +
           "\" font-family=\"monospace\" font-size=\"12\">" + s.name + "</text>\n";
  }
  svg += "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out << svg;
  if (!out) throw FileError("write to '" + path + "' failed");
}

}  // namespace ipfit::diagnostics
