#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtb {

enum class ChartType { line, area, bar, scatter };
enum class ColorMode { mono, color };
enum class LabelMode { with_label, no_label };

inline constexpr std::array<ChartType, 4> kAllChartTypes = {ChartType::line, ChartType::area,
                                                            ChartType::bar, ChartType::scatter};

std::string to_string(ChartType t);
std::string to_string(ColorMode c);
std::string to_string(LabelMode l);
ChartType parse_chart_type(const std::string& s);
ColorMode parse_color_mode(const std::string& s);
LabelMode parse_label_mode(const std::string& s);

class ChartSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ChartSpec {
  ChartType chart_type = ChartType::line;
  ColorMode color_mode = ColorMode::mono;
  LabelMode label_mode = LabelMode::no_label;
  int resolution = 128;
  int stroke_width = 1;
  int marker_size = 3;

  void validate() const;  // throws ChartSpecError
  // "{type}_{color}_{label}_{res}", used in cache file names.
  std::string tag() const;

  friend bool operator==(const ChartSpec&, const ChartSpec&) = default;
};

// The four rendering settings of one chart type, in report column order:
// mono+label, mono+no_label, color+label, color+no_label.
std::vector<ChartSpec> setting_variants(ChartType type, int resolution);
// All 16 type x color x label combinations at one resolution.
std::vector<ChartSpec> all_chart_specs(int resolution);

struct Rgb {
  std::uint8_t r, g, b;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kBlue{0, 0, 255};

struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  RasterImage() = default;
  RasterImage(int w, int h, Rgb fill = kWhite);

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  bool is_white(int x, int y) const { return at(x, y) == kWhite; }
  std::size_t count_non_white() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// Inclusive pixel bounds.
struct PlotRect {
  int x0, y0, x1, y1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  friend bool operator==(const PlotRect&, const PlotRect&) = default;
};

struct Point {
  int x, y;
  friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr int kLabelMargin = 6;
inline constexpr int kTickLength = 3;
inline constexpr int kTicksPerAxis = 5;

PlotRect plot_rect(const ChartSpec& spec);

// One canvas point per timestep. Per-instance min-max scaling: the series
// maximum maps to rect.y0 and the minimum to rect.y1.
std::vector<Point> series_to_canvas(std::span<const float> values, const PlotRect& rect);

// Row of data value 0, clamped into the rect.
int baseline_row(std::span<const float> values, const PlotRect& rect);

RasterImage render(std::span<const float> values, const ChartSpec& spec);

// Draws only the data marks of `spec` into `rect` on a blank canvas of the
// spec's resolution, without frame or ticks.
RasterImage render_marks(std::span<const float> values, const ChartSpec& spec,
                         const PlotRect& rect);

}  // namespace vtb
