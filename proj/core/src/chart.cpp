#include "vtb/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace vtb {

std::string to_string(ChartType t) {
  switch (t) {
    case ChartType::line: return "line";
    case ChartType::area: return "area";
    case ChartType::bar: return "bar";
    case ChartType::scatter: return "scatter";
  }
  return "?";
}
std::string to_string(ColorMode c) { return c == ColorMode::mono ? "mono" : "color"; }
std::string to_string(LabelMode l) {
  return l == LabelMode::with_label ? "with_label" : "no_label";
}

ChartType parse_chart_type(const std::string& s) {
  for (auto t : kAllChartTypes) {
    if (to_string(t) == s) return t;
  }
  throw ChartSpecError("unknown chart type '" + s + "'");
}
ColorMode parse_color_mode(const std::string& s) {
  if (s == "mono") return ColorMode::mono;
  if (s == "color") return ColorMode::color;
  throw ChartSpecError("unknown color mode '" + s + "'");
}
LabelMode parse_label_mode(const std::string& s) {
  if (s == "with_label") return LabelMode::with_label;
  if (s == "no_label") return LabelMode::no_label;
  throw ChartSpecError("unknown label mode '" + s + "'");
}

void ChartSpec::validate() const {
  if (resolution < 16) throw ChartSpecError("resolution must be >= 16");
  if (marker_size < 1 || marker_size % 2 == 0) {
    throw ChartSpecError("marker_size must be odd and >= 1");
  }
  if (stroke_width < 1) throw ChartSpecError("stroke_width must be >= 1");
}

std::string ChartSpec::tag() const {
  return to_string(chart_type) + "_" + to_string(color_mode) + "_" + to_string(label_mode) + "_" +
         std::to_string(resolution);
}

std::vector<ChartSpec> setting_variants(ChartType type, int resolution) {
  std::vector<ChartSpec> out;
  for (auto color : {ColorMode::mono, ColorMode::color}) {
    for (auto label : {LabelMode::with_label, LabelMode::no_label}) {
      ChartSpec s;
      s.chart_type = type;
      s.color_mode = color;
      s.label_mode = label;
      s.resolution = resolution;
      out.push_back(s);
    }
  }
  return out;
}

std::vector<ChartSpec> all_chart_specs(int resolution) {
  std::vector<ChartSpec> out;
  for (auto t : kAllChartTypes) {
    auto v = setting_variants(t, resolution);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

RasterImage::RasterImage(int w, int h, Rgb fill) : width(w), height(h) {
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

Rgb RasterImage::at(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RasterImage::set(int x, int y, Rgb c) {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = c.r;
  pixels[i + 1] = c.g;
  pixels[i + 2] = c.b;
}

std::size_t RasterImage::count_non_white() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    if (pixels[i] != 255 || pixels[i + 1] != 255 || pixels[i + 2] != 255) ++n;
  }
  return n;
}

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

void require_series(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("cannot chart an empty series");
  for (float v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("series contains non-finite values");
  }
}

class Canvas {
 public:
  Canvas(RasterImage& img, PlotRect clip, Rgb ink) : img_(img), clip_(clip), ink_(ink) {}

  void plot(int x, int y) {
    if (clip_.contains(x, y)) img_.set(x, y, ink_);
  }

  void fill_rect(int xa, int ya, int xb, int yb) {
    const int lx = std::max(std::min(xa, xb), clip_.x0);
    const int hx = std::min(std::max(xa, xb), clip_.x1);
    const int ly = std::max(std::min(ya, yb), clip_.y0);
    const int hy = std::min(std::max(ya, yb), clip_.y1);
    for (int y = ly; y <= hy; ++y) {
      for (int x = lx; x <= hx; ++x) img_.set(x, y, ink_);
    }
  }

 private:
  RasterImage& img_;
  PlotRect clip_;
  Rgb ink_;
};

// Integer Bresenham, visiting every pixel of the segment once.
template <typename Visit>
void bresenham(Point a, Point b, Visit&& visit) {
  int x = a.x;
  int y = a.y;
  const int dx = std::abs(b.x - a.x);
  const int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    visit(x, y);
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

template <typename Visit>
void trace_polyline(std::span<const Point> pts, Visit&& visit) {
  if (pts.size() == 1) {
    visit(pts[0].x, pts[0].y);
    return;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) bresenham(pts[i], pts[i + 1], visit);
}

void draw_marks(RasterImage& img, std::span<const float> values, const ChartSpec& spec,
                const PlotRect& rect) {
  const Rgb ink = spec.color_mode == ColorMode::color ? kBlue : kBlack;
  Canvas canvas(img, rect, ink);
  const auto pts = series_to_canvas(values, rect);
  // Brush offsets: [-(w-1)/2, w/2], symmetric for odd widths.
  const int lo = -(spec.stroke_width - 1) / 2;
  const int hi = lo + spec.stroke_width - 1;

  switch (spec.chart_type) {
    case ChartType::line:
      trace_polyline(pts, [&](int x, int y) { canvas.fill_rect(x + lo, y + lo, x + hi, y + hi); });
      break;
    case ChartType::area: {
      const int base = baseline_row(values, rect);
      trace_polyline(pts, [&](int x, int y) {
        canvas.fill_rect(x + lo, y + lo, x + hi, y + hi);
        canvas.fill_rect(x, y, x, base);
      });
      break;
    }
    case ChartType::bar: {
      const int base = baseline_row(values, rect);
      const int bar_w = std::max(1, rect.width() / static_cast<int>(values.size()));
      for (const auto& p : pts) {
        const int left = p.x - (bar_w - 1) / 2;
        canvas.fill_rect(left, p.y, left + bar_w - 1, base);
      }
      break;
    }
    case ChartType::scatter: {
      const int half = spec.marker_size / 2;
      for (const auto& p : pts) canvas.fill_rect(p.x - half, p.y - half, p.x + half, p.y + half);
      break;
    }
  }
}

void draw_frame_and_ticks(RasterImage& img, const PlotRect& r) {
  for (int x = r.x0; x <= r.x1; ++x) {
    img.set(x, r.y0, kBlack);
    img.set(x, r.y1, kBlack);
  }
  for (int y = r.y0; y <= r.y1; ++y) {
    img.set(r.x0, y, kBlack);
    img.set(r.x1, y, kBlack);
  }
  for (int i = 0; i < kTicksPerAxis; ++i) {
    const int tx = r.x0 + round_half_up(static_cast<double>(i) * (r.x1 - r.x0) / (kTicksPerAxis - 1));
    const int ty = r.y0 + round_half_up(static_cast<double>(i) * (r.y1 - r.y0) / (kTicksPerAxis - 1));
    for (int k = 1; k <= kTickLength; ++k) {
      img.set(tx, r.y1 + k, kBlack);  // x-axis ticks below the frame
      img.set(r.x0 - k, ty, kBlack);  // y-axis ticks left of the frame
    }
  }
}

}  // namespace

PlotRect plot_rect(const ChartSpec& spec) {
  const int last = spec.resolution - 1;
  if (spec.label_mode == LabelMode::no_label) return {0, 0, last, last};
  return {kLabelMargin, kLabelMargin, last - kLabelMargin, last - kLabelMargin};
}

std::vector<Point> series_to_canvas(std::span<const float> values, const PlotRect& rect) {
  require_series(values);
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  const std::size_t n = values.size();
  const double x_span = rect.x1 - rect.x0;
  const double y_span = rect.y1 - rect.y0;
  const int mid_x = static_cast<int>(std::floor((rect.x0 + rect.x1) / 2.0));
  const int mid_y = static_cast<int>(std::floor((rect.y0 + rect.y1) / 2.0));

  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const int x = n == 1 ? mid_x
                         : rect.x0 + round_half_up(static_cast<double>(t) * x_span /
                                                   static_cast<double>(n - 1));
    const int y = mx == mn ? mid_y : rect.y0 + round_half_up((mx - values[t]) / (mx - mn) * y_span);
    pts.push_back({x, y});
  }
  return pts;
}

int baseline_row(std::span<const float> values, const PlotRect& rect) {
  require_series(values);
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  if (mn > 0.0) return rect.y1;
  if (mx < 0.0) return rect.y0;
  if (mx == mn) return static_cast<int>(std::floor((rect.y0 + rect.y1) / 2.0));
  return rect.y0 + round_half_up(mx / (mx - mn) * (rect.y1 - rect.y0));
}

RasterImage render_marks(std::span<const float> values, const ChartSpec& spec,
                         const PlotRect& rect) {
  spec.validate();
  require_series(values);
  RasterImage img(spec.resolution, spec.resolution);
  draw_marks(img, values, spec, rect);
  return img;
}

RasterImage render(std::span<const float> values, const ChartSpec& spec) {
  const PlotRect rect = plot_rect(spec);
  RasterImage img = render_marks(values, spec, rect);
  if (spec.label_mode == LabelMode::with_label) draw_frame_and_ticks(img, rect);
  return img;
}

}  // namespace vtb
