#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "discprobe/metrics/aggregate.hpp"

namespace discprobe::experiment {

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  double err = 0.0;  // half-height of the error bar; 0 draws none
};

struct Series {
  std::string label;
  std::vector<PlotPoint> points;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<double> x_ticks;          // empty: derived from the data
  std::vector<std::string> categories;  // bar panels: one label per x = 0, 1, ...
  bool bars = false;
};

struct Figure {
  std::string title;
  std::vector<Panel> panels;
  int columns = 4;
};

enum class PlotKind { kCurves, kAverage, kBreakdown, kCompare };

std::string_view to_string(PlotKind k);
PlotKind plot_kind_from_string(std::string_view s);

// Tasks in the canonical order (nsp, ordering, ...), unknown names last.
std::vector<std::string> ordered_tasks(const metrics::ScoreMatrix& m);

// One panel per task (layer vs. mean with s.d. error bars, one line per
// model) followed by the normalized-average panel when the grids are
// complete.
Figure curves_figure(const metrics::ScoreMatrix& m);

// Normalized average only. Throws ValidationError for an incomplete matrix.
Figure average_figure(const metrics::ScoreMatrix& m);

// Mean rho per sentence count (x = 3..7) at each model's best ordering layer.
Figure breakdown_figure(std::span<const metrics::OrderingInstanceResult> results);

// Per task, the best-layer score of every model as bars with s.d. error bars.
Figure compare_figure(const metrics::ScoreMatrix& m);

std::string render_svg(const Figure& f);
void render_png(const Figure& f, const std::filesystem::path& png);

// Writes <stem>.svg and <stem>.png.
void write_figure(const Figure& f, const std::filesystem::path& stem);

}  // namespace discprobe::experiment
