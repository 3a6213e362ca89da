#include "discprobe/experiment/figures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/core.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/tasks/instances.hpp"

namespace discprobe::experiment {

namespace fs = std::filesystem;

std::string_view to_string(PlotKind k) {
  switch (k) {
    case PlotKind::kCurves: return "curves";
    case PlotKind::kAverage: return "average";
    case PlotKind::kBreakdown: return "breakdown";
    case PlotKind::kCompare: return "compare";
  }
  return "?";
}

PlotKind plot_kind_from_string(std::string_view s) {
  for (auto k : {PlotKind::kCurves, PlotKind::kAverage, PlotKind::kBreakdown, PlotKind::kCompare}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError(fmt::format("unknown plot kind '{}' (curves, average, breakdown, compare)", s));
}

std::vector<std::string> ordered_tasks(const metrics::ScoreMatrix& m) {
  std::vector<std::string> out;
  for (auto t : tasks::all_tasks()) {
    const std::string name(tasks::to_string(t));
    if (m.tasks.count(name)) out.push_back(name);
  }
  for (const auto& name : m.task_names()) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

namespace {

Panel task_panel(const std::string& task, const std::map<metrics::CellKey, metrics::CellStat>& grid) {
  Panel p{task, "layer", "score", {}, {}, {}, false};
  std::map<std::string, Series> by_model;
  for (const auto& [key, stat] : grid) {
    auto& s = by_model[key.first];
    s.label = key.first;
    s.points.push_back({static_cast<double>(key.second), stat.mean, stat.sd});
  }
  for (auto& [name, s] : by_model) p.series.push_back(std::move(s));
  return p;
}

Panel average_panel(const metrics::ScoreMatrix& m) {
  const auto avg = metrics::aggregate(m);
  Panel p{"average", "layer", "normalized score", {}, {}, {}, false};
  std::map<std::string, Series> by_model;
  for (const auto& [key, v] : avg) {
    auto& s = by_model[key.first];
    s.label = key.first;
    s.points.push_back({static_cast<double>(key.second), v, 0.0});
  }
  for (auto& [name, s] : by_model) p.series.push_back(std::move(s));
  return p;
}

}  // namespace

Figure curves_figure(const metrics::ScoreMatrix& m) {
  Figure f{"Probing performance per layer", {}, 4};
  for (const auto& t : ordered_tasks(m)) f.panels.push_back(task_panel(t, m.tasks.at(t)));
  try {
    f.panels.push_back(average_panel(m));
  } catch (const ValidationError& e) {
    spdlog::warn("average panel omitted: {}", e.what());
  }
  return f;
}

Figure average_figure(const metrics::ScoreMatrix& m) {
  Figure f{"Normalized average over tasks", {average_panel(m)}, 1};
  return f;
}

Figure breakdown_figure(std::span<const metrics::OrderingInstanceResult> results) {
  if (results.empty()) throw ValidationError("ordering breakdown needs per-instance results");
  std::vector<std::string> models;
  for (const auto& r : results) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
  }
  std::sort(models.begin(), models.end());
  Panel p{"sentence ordering by number of sentences", "sentences", "mean Spearman", {}, {3, 4, 5, 6, 7}, {}, false};
  for (const auto& model : models) {
    const int best = metrics::best_ordering_layer(results, model);
    Series s{fmt::format("{} (layer {})", model, best), {}};
    for (const auto& [n, bucket] : metrics::ordering_breakdown(results, model, best)) {
      s.points.push_back({static_cast<double>(n), bucket.mean_rho, 0.0});
    }
    p.series.push_back(std::move(s));
  }
  return {"Ordering breakdown", {p}, 1};
}

Figure compare_figure(const metrics::ScoreMatrix& m) {
  Figure f{"Best-layer comparison across models", {}, 4};
  const auto models = m.model_names();
  for (const auto& t : ordered_tasks(m)) {
    Panel p{t, "model", "best-layer score", {}, {}, models, true};
    Series s{"best layer", {}};
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (auto best = metrics::best_layer(m, t, models[i])) {
        s.points.push_back({static_cast<double>(i), best->second.mean, best->second.sd});
      }
    }
    p.series.push_back(std::move(s));
    f.panels.push_back(std::move(p));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct Rgb {
  int r, g, b;
};

const Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
                        {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};
const Rgb kBlack{0, 0, 0};
const Rgb kGrey{200, 200, 200};

enum class Anchor { kStart, kMiddle, kEnd };

class Canvas {
 public:
  virtual ~Canvas() = default;
  virtual void line(double x1, double y1, double x2, double y2, Rgb c, double width) = 0;
  virtual void rect(double x, double y, double w, double h, Rgb fill) = 0;
  virtual void circle(double x, double y, double r, Rgb c) = 0;
  virtual void text(double x, double y, const std::string& s, double size, Anchor a, bool vertical = false) = 0;
};

class SvgCanvas : public Canvas {
 public:
  SvgCanvas(int w, int h) {
    out_ = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
        w, h);
  }
  void line(double x1, double y1, double x2, double y2, Rgb c, double width) override {
    out_ += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
                        x1, y1, x2, y2, color(c), width);
  }
  void rect(double x, double y, double w, double h, Rgb fill) override {
    out_ += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", x, y, w, h,
                        color(fill));
  }
  void circle(double x, double y, double r, Rgb c) override {
    out_ += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{}\" fill=\"{}\"/>\n", x, y, r, color(c));
  }
  void text(double x, double y, const std::string& s, double size, Anchor a, bool vertical) override {
    const char* anchor = a == Anchor::kStart ? "start" : a == Anchor::kMiddle ? "middle" : "end";
    const std::string rot = vertical ? fmt::format(" transform=\"rotate(-90 {:.2f} {:.2f})\"", x, y) : "";
    out_ += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"{}\" text-anchor=\"{}\"{}>{}</text>\n", x, y, size,
                        anchor, rot, escape(s));
  }
  std::string finish() { return out_ + "</svg>\n"; }

 private:
  static std::string color(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }
  static std::string escape(const std::string& s) {
    std::string o;
    for (char ch : s) {
      if (ch == '&') o += "&amp;";
      else if (ch == '<') o += "&lt;";
      else if (ch == '>') o += "&gt;";
      else o += ch;
    }
    return o;
  }
  std::string out_;
};

class CvCanvas : public Canvas {
 public:
  CvCanvas(int w, int h) : img_(h, w, CV_8UC3, cv::Scalar(255, 255, 255)) {}
  void line(double x1, double y1, double x2, double y2, Rgb c, double width) override {
    cv::line(img_, pt(x1, y1), pt(x2, y2), bgr(c), std::max(1, static_cast<int>(std::lround(width))), cv::LINE_AA);
  }
  void rect(double x, double y, double w, double h, Rgb fill) override {
    cv::rectangle(img_, pt(x, y), pt(x + w, y + h), bgr(fill), cv::FILLED);
  }
  void circle(double x, double y, double r, Rgb c) override {
    cv::circle(img_, pt(x, y), static_cast<int>(std::lround(r)), bgr(c), cv::FILLED, cv::LINE_AA);
  }
  void text(double x, double y, const std::string& s, double size, Anchor a, bool vertical) override {
    const double scale = size / 28.0;
    int base = 0;
    const cv::Size ts = cv::getTextSize(s, cv::FONT_HERSHEY_SIMPLEX, scale, 1, &base);
    const double shift = a == Anchor::kStart ? 0.0 : a == Anchor::kMiddle ? ts.width / 2.0 : ts.width;
    if (!vertical) {
      cv::putText(img_, s, pt(x - shift, y), cv::FONT_HERSHEY_SIMPLEX, scale, bgr(kBlack), 1, cv::LINE_AA);
      return;
    }
    cv::Mat tile(ts.height + base + 2, ts.width + 2, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::putText(tile, s, cv::Point(1, ts.height + 1), cv::FONT_HERSHEY_SIMPLEX, scale, bgr(kBlack), 1, cv::LINE_AA);
    cv::Mat rotated;
    cv::rotate(tile, rotated, cv::ROTATE_90_COUNTERCLOCKWISE);
    const int x0 = static_cast<int>(x) - rotated.cols;
    const int y0 = static_cast<int>(y - shift);
    const cv::Rect dst(std::max(0, x0), std::max(0, y0), 0, 0);
    const int w = std::min(rotated.cols, img_.cols - dst.x);
    const int h = std::min(rotated.rows, img_.rows - dst.y);
    if (w > 0 && h > 0) rotated(cv::Rect(0, 0, w, h)).copyTo(img_(cv::Rect(dst.x, dst.y, w, h)));
  }
  const cv::Mat& image() const { return img_; }

 private:
  static cv::Point pt(double x, double y) { return {static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))}; }
  static cv::Scalar bgr(Rgb c) { return {static_cast<double>(c.b), static_cast<double>(c.g), static_cast<double>(c.r)}; }
  cv::Mat img_;
};

constexpr double kPanelW = 360, kPanelH = 270, kLeft = 58, kRight = 14, kTop = 30, kBottom = 44;
constexpr double kTitleH = 36, kLegendRow = 20;

double nice_step(double range) {
  const double raw = range / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

std::vector<std::string> legend_labels(const Figure& f) {
  std::vector<std::string> labels;
  for (const auto& p : f.panels) {
    if (p.bars) continue;
    for (const auto& s : p.series) {
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) labels.push_back(s.label);
    }
  }
  return labels;
}

void draw_panel(Canvas& c, const Panel& p, double ox, double oy, const std::vector<std::string>& legend) {
  const double pw = kPanelW - kLeft - kRight, ph = kPanelH - kTop - kBottom;
  const double px = ox + kLeft, py = oy + kTop;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : p.series) {
    for (const auto& pt : s.points) {
      xmin = std::min(xmin, pt.x);
      xmax = std::max(xmax, pt.x);
      ymin = std::min(ymin, pt.y - pt.err);
      ymax = std::max(ymax, pt.y + pt.err);
    }
  }
  for (double t : p.x_ticks) {
    xmin = std::min(xmin, t);
    xmax = std::max(xmax, t);
  }
  if (p.bars) {
    xmin = -0.5;
    xmax = static_cast<double>(p.categories.size()) - 0.5;
    ymin = std::min(0.0, ymin);
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  const double pad = (ymax - ymin) * 0.06;
  ymin -= p.bars && ymin == 0.0 ? 0.0 : pad;
  ymax += pad;
  auto X = [&](double v) { return px + (v - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double v) { return py + ph - (v - ymin) / (ymax - ymin) * ph; };

  c.text(ox + kPanelW / 2, oy + 20, p.title, 14, Anchor::kMiddle);
  const double step = nice_step(ymax - ymin);
  for (double v = std::ceil(ymin / step) * step; v <= ymax + 1e-12; v += step) {
    c.line(px, Y(v), px + pw, Y(v), kGrey, 1);
    c.text(px - 5, Y(v) + 4, fmt::format("{:.2f}", std::abs(v) < 1e-9 ? 0.0 : v), 10, Anchor::kEnd);
  }
  std::vector<double> xt = p.x_ticks;
  if (xt.empty() && !p.bars) {
    const double span = xmax - xmin;
    const double xs = span <= 12 ? 1 : span <= 24 ? 2 : std::ceil(span / 12);
    for (double v = std::ceil(xmin); v <= xmax + 1e-12; v += xs) xt.push_back(v);
  }
  for (double v : xt) c.text(X(v), py + ph + 15, fmt::format("{:g}", v), 10, Anchor::kMiddle);
  for (std::size_t i = 0; i < p.categories.size(); ++i) {
    c.text(X(static_cast<double>(i)), py + ph + 15, p.categories[i].substr(0, 12), 9, Anchor::kMiddle);
  }
  c.line(px, py + ph, px + pw, py + ph, kBlack, 1);
  c.line(px, py, px, py + ph, kBlack, 1);
  c.text(px + pw / 2, py + ph + 34, p.x_label, 11, Anchor::kMiddle);
  c.text(ox + 14, py + ph / 2, p.y_label, 11, Anchor::kMiddle, true);

  for (const auto& s : p.series) {
    const auto idx = static_cast<std::size_t>(std::find(legend.begin(), legend.end(), s.label) - legend.begin());
    const Rgb col = kPalette[idx % std::size(kPalette)];
    auto pts = s.points;
    std::sort(pts.begin(), pts.end(), [](const PlotPoint& a, const PlotPoint& b) { return a.x < b.x; });
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& q = pts[i];
      if (p.bars) {
        const double bw = pw / static_cast<double>(std::max<std::size_t>(1, p.categories.size())) * 0.6;
        const Rgb bc = kPalette[static_cast<std::size_t>(q.x) % std::size(kPalette)];
        c.rect(X(q.x) - bw / 2, Y(q.y), bw, Y(std::max(ymin, 0.0)) - Y(q.y), bc);
      } else {
        if (i > 0) c.line(X(pts[i - 1].x), Y(pts[i - 1].y), X(q.x), Y(q.y), col, 2);
        c.circle(X(q.x), Y(q.y), 2.5, col);
      }
      if (q.err > 0) {
        c.line(X(q.x), Y(q.y - q.err), X(q.x), Y(q.y + q.err), kBlack, 1);
        c.line(X(q.x) - 3, Y(q.y - q.err), X(q.x) + 3, Y(q.y - q.err), kBlack, 1);
        c.line(X(q.x) - 3, Y(q.y + q.err), X(q.x) + 3, Y(q.y + q.err), kBlack, 1);
      }
    }
  }
}

struct Layout {
  int cols, rows, width, height, legend_rows;
};

Layout layout_of(const Figure& f, std::size_t legend_count) {
  const int n = std::max<int>(1, static_cast<int>(f.panels.size()));
  const int cols = std::min(std::max(1, f.columns), n);
  const int rows = (n + cols - 1) / cols;
  const int width = static_cast<int>(cols * kPanelW);
  const int per_row = std::max(1, width / 240);
  const int legend_rows = static_cast<int>((legend_count + static_cast<std::size_t>(per_row) - 1) / static_cast<std::size_t>(per_row));
  const int height = static_cast<int>(kTitleH + rows * kPanelH + legend_rows * kLegendRow + 10);
  return {cols, rows, width, height, legend_rows};
}

void draw(Canvas& c, const Figure& f, const Layout& l, const std::vector<std::string>& legend) {
  c.text(l.width / 2.0, 24, f.title, 16, Anchor::kMiddle);
  for (std::size_t i = 0; i < f.panels.size(); ++i) {
    const int col = static_cast<int>(i) % l.cols, row = static_cast<int>(i) / l.cols;
    draw_panel(c, f.panels[i], col * kPanelW, kTitleH + row * kPanelH, legend);
  }
  const int per_row = std::max(1, l.width / 240);
  const double ly = kTitleH + l.rows * kPanelH;
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const double x = 20 + static_cast<double>(i % static_cast<std::size_t>(per_row)) * 240;
    const double y = ly + static_cast<double>(i / static_cast<std::size_t>(per_row)) * kLegendRow + 12;
    c.line(x, y - 4, x + 22, y - 4, kPalette[i % std::size(kPalette)], 3);
    c.text(x + 28, y, legend[i], 11, Anchor::kStart);
  }
}

}  // namespace

std::string render_svg(const Figure& f) {
  const auto legend = legend_labels(f);
  const auto l = layout_of(f, legend.size());
  SvgCanvas c(l.width, l.height);
  draw(c, f, l, legend);
  return c.finish();
}

void render_png(const Figure& f, const fs::path& png) {
  const auto legend = legend_labels(f);
  const auto l = layout_of(f, legend.size());
  CvCanvas c(l.width, l.height);
  draw(c, f, l, legend);
  std::vector<uchar> buf;
  if (!cv::imencode(".png", c.image(), buf)) throw IoError(fmt::format("cannot encode '{}'", png.string()));
  io::write_file_atomic(png, std::string(buf.begin(), buf.end()));
}

void write_figure(const Figure& f, const fs::path& stem) {
  if (!stem.parent_path().empty()) fs::create_directories(stem.parent_path());
  io::write_file_atomic(fs::path(stem.string() + ".svg"), render_svg(f));
  render_png(f, fs::path(stem.string() + ".png"));
}

}  // namespace discprobe::experiment
