#include <doctest.h>

#include <fstream>

#include "tmpdir.hpp"
#include "vtb/chart.hpp"
#include "vtb/hash.hpp"
#include "vtb/png.hpp"
#include "vtb/render_cache.hpp"

using namespace vtb;

TEST_CASE("plot rect") {
  CHECK(plot_rect({ChartType::line, ColorMode::mono, LabelMode::no_label, 128}) == PlotRect{0, 0, 127, 127});
  CHECK(plot_rect({ChartType::line, ColorMode::mono, LabelMode::with_label, 128}) == PlotRect{6, 6, 121, 121});
  CHECK(plot_rect({ChartType::bar, ColorMode::color, LabelMode::with_label, 64}) == PlotRect{6, 6, 57, 57});
}

TEST_CASE("series to canvas") {
  const PlotRect r{0, 0, 127, 127};
  const std::vector<float> two{0.0f, 1.0f};
  CHECK(series_to_canvas(two, r) == std::vector<Point>{{0, 127}, {127, 0}});
  const std::vector<float> flat{5.0f, 5.0f, 5.0f};
  for (auto p : series_to_canvas(flat, r)) CHECK(p.y == 63);
  const std::vector<float> one{2.0f};
  CHECK(series_to_canvas(one, r)[0].x == 63);
  CHECK_THROWS(series_to_canvas(std::vector<float>{}, r));
}

TEST_CASE("baseline row") {
  const PlotRect r{0, 0, 127, 127};
  // 0 sits halfway in [-1, 1]: 63.5 rounds half up
  CHECK(baseline_row(std::vector<float>{-1.0f, 1.0f}, r) == 64);
  CHECK(baseline_row(std::vector<float>{1.0f, 3.0f}, r) == 127);
  CHECK(baseline_row(std::vector<float>{-1.0f, -3.0f}, r) == 0);
  CHECK(baseline_row(std::vector<float>{-1.0f, 3.0f}, r) == 95);
}

TEST_CASE("spec validation and tags") {
  ChartSpec s{ChartType::scatter, ColorMode::color, LabelMode::with_label, 64};
  CHECK(s.tag() == "scatter_color_with_label_64");
  s.marker_size = 4;
  CHECK_THROWS_AS(s.validate(), ChartSpecError);
  s.marker_size = 3;
  s.resolution = 8;
  CHECK_THROWS_AS(s.validate(), ChartSpecError);
  CHECK(all_chart_specs(128).size() == 16);
  CHECK(setting_variants(ChartType::area, 64).size() == 4);
}

TEST_CASE("scatter of five points") {
  const std::vector<float> v{1.0f, 3.0f, 2.0f, 5.0f, 4.0f};
  const auto img = render(v, {ChartType::scatter, ColorMode::mono, LabelMode::no_label, 128});
  CHECK(img.count_non_white() <= 45);
  // interior points keep the full 3x3 square
  const auto pts = series_to_canvas(v, {0, 0, 127, 127});
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) CHECK_FALSE(img.is_white(pts[2].x + dx, pts[2].y + dy));
  }
}

TEST_CASE("every timestep leaves ink and label mode keeps interior marks") {
  std::vector<float> v;
  for (int i = 0; i < 300; ++i) v.push_back(static_cast<float>((i * 37) % 11) - 5.0f);
  for (ChartType t : kAllChartTypes) {
    for (int res : {64, 128}) {
      const ChartSpec lab{t, ColorMode::mono, LabelMode::with_label, res};
      const ChartSpec nol{t, ColorMode::mono, LabelMode::no_label, res};
      const auto rect = plot_rect(lab);
      const auto img = render(v, lab);
      for (auto p : series_to_canvas(v, rect)) CHECK_FALSE(img.is_white(p.x, p.y));
      // same marks in the same rect regardless of label mode
      const auto marks_lab = render_marks(v, lab, rect);
      const auto marks_nol = render_marks(v, nol, rect);
      CHECK(marks_lab == marks_nol);
      for (int y = rect.y0 + 1; y < rect.y1; ++y) {
        for (int x = rect.x0 + 1; x < rect.x1; ++x) {
          if (img.at(x, y) != marks_lab.at(x, y)) FAIL("interior pixel differs at " << x << "," << y);
        }
      }
      // the frame and ticks are the only extra ink
      CHECK(img.count_non_white() >= marks_lab.count_non_white());
    }
  }
}

TEST_CASE("line and scatter are invariant to positive affine maps") {
  const std::vector<float> v{0.0f, 1.0f, 3.0f, 2.0f, 5.0f, 4.0f, 0.5f};
  std::vector<float> w;
  for (float x : v) w.push_back(2.0f * x + 10.0f);
  for (ChartType t : {ChartType::line, ChartType::scatter}) {
    const ChartSpec s{t, ColorMode::color, LabelMode::with_label, 64};
    CHECK(render(v, s) == render(w, s));
  }
}

TEST_CASE("png round trip") {
  const std::vector<float> v{0.0f, 2.0f, 1.0f};
  const auto img = render(v, {ChartType::area, ColorMode::color, LabelMode::with_label, 64});
  const auto bytes = encode_png(img);
  CHECK(decode_png(bytes) == img);
  CHECK(encode_png(img) == bytes);
  CHECK_THROWS_AS(decode_png(std::vector<std::uint8_t>{1, 2, 3}), PngError);
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("render cache writes 16 files per instance and skips on re-run") {
  TempDir dir("cache");
  LabeledSeriesSet set;
  set.meta.name = "Toy";
  set.meta.length = 5;
  set.meta.num_classes = 2;
  set.instances = {{{0, 1, 2, 1, 0}, 0}, {{3, 1, 4, 1, 5}, 1}};
  const auto specs = all_chart_specs(32);
  const auto m1 = render_cache(set, "train", specs, dir.path);
  CHECK(m1.records.size() == 32);
  CHECK(m1.rendered == 32);
  const auto m2 = render_cache(set, "train", specs, dir.path);
  CHECK(m2.rendered == 0);
  CHECK(m2.skipped == 32);
  CHECK(read_manifest(manifest_path(dir.path, "Toy", "train")).records.size() == 32);

  const auto victim = dir.path / chart_cache_path("Toy", "train", 1, specs[3]);
  REQUIRE(std::filesystem::exists(victim));
  std::filesystem::remove(victim);
  const auto m3 = render_cache(set, "train", specs, dir.path);
  CHECK(m3.rendered == 1);
  CHECK(std::filesystem::exists(victim));
  CHECK(load_cached_chart(dir.path, "Toy", "train", 1, specs[3]) == render(set.instances[1].values, specs[3]));

  // altered bytes are re-rendered, not trusted
  std::ofstream(victim, std::ios::binary) << "junk";
  CHECK(render_cache(set, "train", specs, dir.path).rendered == 1);
}
