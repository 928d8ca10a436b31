// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "vtb/chart.hpp"
#include "vtb/encoders.hpp"
#include "vtb/experiment.hpp"
#include "vtb/fusion.hpp"
#include "vtb/model.hpp"
#include "vtb/png.hpp"
#include "vtb/report.hpp"
#include "vtb/rng.hpp"
#include "vtb/run.hpp"
#include "vtb/selfcheck.hpp"
#include "vtb/stats.hpp"
#include "vtb/train.hpp"

#ifndef VTB_DATA_DIR
#define VTB_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace vtb;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

int g_failures = 0;

void report(int n, Verdict& v, const std::string& summary) {
  if (!v.pass) ++g_failures;
  std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << summary;
  if (!v.pass) std::cout << "  [" << v.detail.str() << "]";
  std::cout << std::endl;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---------------------------------------------------------------- 1

void criterion_gradients() {
  Verdict v;
  const double t0 = cpu_seconds();
  double worst_layer = 0.0, worst_stack = 0.0;
  std::size_t cases = 0;
  std::set<std::string> stacks;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& c : gradient_cases(seed)) {
      ++cases;
      const double tol = c.stack ? 5e-3 : 1e-3;
      v.require(c.checked > 0 && c.rel_error < tol,
                c.name + " seed " + std::to_string(seed) + " rel " + fmt(c.rel_error, 6));
      (c.stack ? worst_stack : worst_layer) = std::max(c.stack ? worst_stack : worst_layer, c.rel_error);
      if (c.stack) stacks.insert(c.name);
    }
  }
  for (const char* need : {"shallow_cnn", "deep_cnn", "fusion_head_concat", "fusion_head_weighted",
                           "multibranch_classifier"}) {
    v.require(stacks.count(need) == 1, std::string("missing stack case ") + need);
  }
  const double cpu = cpu_seconds() - t0;
  v.require(cpu < 60.0, "cpu " + fmt(cpu, 1) + " s");
  report(1, v, std::to_string(cases) + " checks over 3 seeds, worst layer " + fmt(worst_layer, 6) +
                   ", worst stack " + fmt(worst_stack, 6) + ", cpu " + fmt(cpu, 1) + " s");
}

// ---------------------------------------------------------------- 2

std::vector<std::pair<int, int>> non_white(const RasterImage& img) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!img.is_white(x, y)) out.emplace_back(x, y);
    }
  }
  return out;
}

// 8-connected, as Bresenham steps diagonally.
int components(const RasterImage& img) {
  std::vector<char> seen(static_cast<std::size_t>(img.width * img.height), 0);
  int count = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.is_white(x, y) || seen[y * img.width + x]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.emplace(x, y);
      seen[y * img.width + x] = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        for (int k = 0; k < 9; ++k) {
          const int nx = cx + k % 3 - 1, ny = cy + k / 3 - 1;
          if (nx < 0 || ny < 0 || nx >= img.width || ny >= img.height) continue;
          if (img.is_white(nx, ny) || seen[ny * img.width + nx]) continue;
          seen[ny * img.width + nx] = 1;
          q.emplace(nx, ny);
        }
      }
    }
  }
  return count;
}

bool ink_only(const RasterImage& img) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Rgb c = img.at(x, y);
      if (c != kWhite && c != kBlack && c != kBlue) return false;
    }
  }
  return true;
}

void criterion_rasterizer() {
  Verdict v;
  int checks = 0;
  Rng rng(2024);
  std::vector<float> wave(37);
  for (std::size_t i = 0; i < wave.size(); ++i) wave[i] = static_cast<float>(std::sin(0.4 * i) + 0.3 * rng.normal());

  for (int res : {64, 128, 256}) {
    const int last = res - 1;
    const int mid = last / 2;
    for (ChartType type : kAllChartTypes) {
      const std::string tag = to_string(type) + "@" + std::to_string(res);
      ChartSpec mono{type, ColorMode::mono, LabelMode::no_label, res};
      ChartSpec color{type, ColorMode::color, LabelMode::no_label, res};

      // Constant series: the mark collapses onto the middle row.
      {
        const std::vector<float> flat(40, 3.0f);
        const auto img = render(flat, mono);
        const auto px = non_white(img);
        bool ok = !px.empty();
        std::set<int> cols;
        for (auto [x, y] : px) {
          cols.insert(x);
          switch (type) {
            case ChartType::line: ok &= y == mid; break;
            case ChartType::area:
            case ChartType::bar: ok &= y >= mid && y <= last; break;  // filled down to the bottom edge
            case ChartType::scatter: ok &= std::abs(y - mid) <= 1; break;
          }
        }
        if (type == ChartType::line) ok &= px.size() == static_cast<std::size_t>(res) && cols.size() == static_cast<std::size_t>(res);
        if (type == ChartType::area) ok &= px.size() == static_cast<std::size_t>(res * (last - mid + 1));
        v.require(ok, "constant series " + tag);
        ++checks;
      }

      // Baseline clamping: all-positive fills to the bottom edge, all-negative to the top.
      {
        const PlotRect rect{0, 0, last, last};
        std::vector<float> pos(20), neg(20), span(20);
        for (int i = 0; i < 20; ++i) {
          pos[i] = 1.0f + static_cast<float>(i % 7);
          neg[i] = -pos[i];
          span[i] = i % 2 ? 1.0f : -1.0f;
        }
        v.require(baseline_row(pos, rect) == last && baseline_row(neg, rect) == 0 &&
                      baseline_row(span, rect) == static_cast<int>(std::floor(last / 2.0 + 0.5)),
                  "baseline_row " + tag);
        const auto ip = render(pos, mono), in = render(neg, mono);
        if (type == ChartType::area || type == ChartType::bar) {
          // every plotted column touches the clamped baseline
          const auto pts = series_to_canvas(pos, rect);
          bool ok = true;
          for (const auto& p : pts) ok &= !ip.is_white(p.x, last) && !in.is_white(p.x, 0);
          v.require(ok, "baseline fill " + tag);
        } else {
          // no baseline: lifting the negative series above zero changes nothing
          std::vector<float> lifted(neg);
          for (auto& x : lifted) x += 100.0f;
          v.require(in == render(lifted, mono) && ip != in, "baseline independence " + tag);
        }
        ++checks;
      }

      // Scatter: T=5 markers of 3x3 give 5 separate squares.
      {
        const std::vector<float> five{0.0f, 2.0f, 1.0f, 4.0f, 3.0f};
        const auto img = render(five, ChartSpec{type, ColorMode::mono, LabelMode::no_label, res});
        const int comp = components(img);
        const auto n = non_white(img).size();
        switch (type) {
          case ChartType::scatter: v.require(comp == 5 && n <= 45, "scatter components " + tag); break;
          case ChartType::line:
          case ChartType::area: v.require(comp == 1, "connected " + tag); break;
          case ChartType::bar: v.require(comp >= 1 && comp <= 5, "bar components " + tag); break;
        }
        ++checks;
      }

      // Color and mono share positions; only the ink differs.
      {
        const auto a = render(wave, mono), b = render(wave, color);
        bool ok = a.width == b.width && ink_only(a) && ink_only(b);
        for (int y = 0; ok && y < res; ++y) {
          for (int x = 0; x < res; ++x) {
            const bool wa = a.is_white(x, y), wb = b.is_white(x, y);
            ok &= wa == wb;
            if (!wa) ok &= a.at(x, y) == kBlack && b.at(x, y) == kBlue;
          }
        }
        v.require(ok, "color/mono identity " + tag);
        ++checks;
      }

      // Re-render is byte-identical, labelled charts included.
      for (LabelMode lm : {LabelMode::no_label, LabelMode::with_label}) {
        ChartSpec s{type, ColorMode::color, lm, res};
        const auto p1 = encode_png(render(wave, s));
        const auto p2 = encode_png(render(wave, s));
        v.require(p1 == p2 && decode_png(p1) == render(wave, s), "re-render " + tag);
        ++checks;
      }
    }
  }
  report(2, v, std::to_string(checks) + " oracle checks over 4 chart types x {64,128,256}");
}

// ---------------------------------------------------------------- 3

void criterion_accuracy() {
  Verdict v;
  RunContext ctx;
  ctx.data_root = fs::path(VTB_DATA_DIR) / "ucr";
  struct Target {
    std::string dataset;
    ColorMode color;
  };
  const double t0 = cpu_seconds();
  const auto w0 = std::chrono::steady_clock::now();
  std::vector<std::string> parts;
  std::vector<double> means;
  for (const Target& t : {Target{"ItalyPowerDemand", ColorMode::mono}, Target{"GunPoint", ColorMode::color}}) {
    RunConfig cfg;
    cfg.dataset = t.dataset;
    cfg.architecture = Architecture::single_chart;
    cfg.chart_type = ChartType::line;
    cfg.color_mode = t.color;
    cfg.label_mode = LabelMode::no_label;
    cfg.resolution = 128;
    cfg.backbone = nn::EncoderKind::deep_cnn;
    std::vector<double> acc;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      cfg.train.seed = seed;
      const auto rec = run_single(cfg, ctx);
      v.require(rec.ok(), t.dataset + " seed " + std::to_string(seed) + ": " + rec.error);
      acc.push_back(rec.ok() ? rec.test.accuracy : 0.0);
    }
    const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    means.push_back(mean);
    v.require(mean >= 0.90, t.dataset + " mean " + fmt(mean));
    std::ostringstream os;
    os << t.dataset << " " << to_string(t.color) << " mean " << fmt(mean) << " (min "
       << fmt(*std::min_element(acc.begin(), acc.end())) << ", max " << fmt(*std::max_element(acc.begin(), acc.end()))
       << ")";
    parts.push_back(os.str());
  }
  const double cpu = cpu_seconds() - t0;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
  v.require(cpu < 1800.0, "cpu " + fmt(cpu, 0) + " s");
  if (means[0] < 0.85 && means[1] < 0.85) v.require(false, "both below 0.85");
  report(3, v, parts[0] + "; " + parts[1] + "; cpu " + fmt(cpu, 0) + " s, wall " + fmt(wall, 0) + " s");
}

// ---------------------------------------------------------------- 4

void criterion_simplex() {
  Verdict v;
  Rng rng(77);
  double worst = 0.0;
  std::size_t rows = 0;
  for (int pass = 0; pass < 1000; ++pass) {
    const std::size_t k = 1 + rng.below(5);
    const std::size_t n = 1 + rng.below(6);
    const std::size_t d = 1 + rng.below(16);
    const double spread = std::pow(10.0, rng.uniform(-2.0, 2.0));
    std::vector<nn::Var> h, w;
    for (std::size_t b = 0; b < k; ++b) {
      nn::Tensor hv({n, d}), wv({1, d});
      for (auto& x : hv.span()) x = static_cast<float>(rng.normal() * spread);
      for (auto& x : wv.span()) x = static_cast<float>(rng.normal());
      h.push_back(nn::constant(hv));
      w.push_back(nn::constant(wv));
    }
    const auto out = nn::weighted_fuse(h, w);
    const auto& a = out.alpha.value();
    v.require(a.shape() == nn::Shape{n, k}, "alpha shape");
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double x = a[i * k + j];
        if (!(x >= 0.0 && x <= 1.0)) v.require(false, "alpha outside [0,1]");
        sum += x;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
      ++rows;
    }
  }
  v.require(worst <= 1e-6, "sum deviation " + std::to_string(worst));
  report(4, v, "1000 passes, " + std::to_string(rows) + " rows, max |sum-1| = " + std::to_string(worst));
}

// ---------------------------------------------------------------- 5

// Class decides a constant offset of the whole series; per-instance min-max
// scaling in the chart erases it, the raw series keeps it.
LabeledSeriesSet offset_dataset(std::size_t n, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSeriesSet set;
  set.meta.name = "Offset";
  set.meta.length = length;
  set.meta.num_classes = 2;
  set.meta.label_map = LabelMap({0.0, 1.0});
  for (std::size_t i = 0; i < n; ++i) {
    TimeSeriesInstance inst;
    inst.label = static_cast<int>(i % 2);
    const double offset = inst.label ? 4.0 : -4.0;
    const double freq = rng.uniform(0.2, 0.8), phase = rng.uniform(0.0, 6.28);
    for (std::size_t t = 0; t < length; ++t) {
      inst.values.push_back(static_cast<float>(offset + std::sin(freq * t + phase) + 0.3 * rng.normal()));
    }
    set.instances.push_back(std::move(inst));
  }
  return set;
}

double fit_and_test(bool numeric, std::uint64_t seed) {
  const std::size_t length = 32;
  const std::vector<ChartSpec> charts{{ChartType::line, ColorMode::mono, LabelMode::no_label, 32}};
  const auto tr = build_samples(offset_dataset(160, length, 100 + seed), charts);
  const auto va = build_samples(offset_dataset(60, length, 200 + seed), charts);
  const auto te = build_samples(offset_dataset(200, length, 300 + seed), charts);
  ModelConfig mc;
  mc.charts = charts;
  mc.numeric = numeric;
  mc.backbone = nn::EncoderKind::shallow_cnn;
  mc.numeric_encoder.kind = nn::EncoderKind::fcn;
  mc.fusion.strategy = nn::FusionStrategy::concat;
  mc.num_classes = 2;
  mc.length = length;
  MultiBranchClassifier model(mc, seed);
  TrainConfig tc;
  tc.seed = seed;
  tc.max_epochs = 40;
  train(model, tr, va, tc);
  return evaluate(model, te).accuracy;
}

void criterion_complementarity() {
  Verdict v;
  std::ostringstream os;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const double chart = fit_and_test(false, seed);
    const double multi = fit_and_test(true, seed);
    v.require(multi - chart >= 0.2, "seed " + std::to_string(seed) + " gap " + fmt(multi - chart));
    os << (seed ? "; " : "") << "seed " << seed << " chart " << fmt(chart, 3) << " multimodal " << fmt(multi, 3);
  }
  report(5, v, os.str());
}

// ---------------------------------------------------------------- 6

void criterion_table_stats() {
  Verdict v;
  const auto m = read_matrix_csv(fs::path(VTB_DATA_DIR) / "fixtures" / "image_size_accuracy.csv");
  v.require(m.datasets.size() == 31 && m.methods.size() == 3, "fixture shape");
  auto column = [&](std::size_t j) {
    std::vector<double> c;
    for (const auto& row : m.acc) c.push_back(row.at(j).value());
    return c;
  };
  const auto a64 = column(0), a128 = column(1), a256 = column(2);
  const auto w128_64 = stats::wilcoxon_signed_rank(a128, a64);
  const auto w256_128 = stats::wilcoxon_signed_rank(a256, a128);
  const auto w256_64 = stats::wilcoxon_signed_rank(a256, a64);
  const auto d128_64 = stats::cliffs_delta(a128, a64).delta;
  const auto d256_128 = stats::cliffs_delta(a256, a128).delta;
  const auto d256_64 = stats::cliffs_delta(a256, a64).delta;
  v.require(w128_64.p_value < 0.05, "128v64 p " + fmt(w128_64.p_value));
  v.require(std::abs(d128_64 - 0.0604) <= 0.02, "128v64 delta " + fmt(d128_64));
  v.require(w256_128.p_value > 0.05, "256v128 p " + fmt(w256_128.p_value));
  v.require(std::abs(d256_128) <= 0.03, "256v128 delta " + fmt(d256_128));
  v.require(w256_64.p_value > 0.05, "256v64 p " + fmt(w256_64.p_value));

  stats::WilcoxonOptions exact;
  exact.method = stats::WilcoxonMethod::exact;
  const double e1 = stats::wilcoxon_signed_rank(a128, a64, exact).p_value;
  const double e2 = stats::wilcoxon_signed_rank(a256, a128, exact).p_value;
  const double e3 = stats::wilcoxon_signed_rank(a256, a64, exact).p_value;
  report(6, v,
         "p 128v64 " + fmt(w128_64.p_value) + " d " + fmt(d128_64) + "; 256v128 p " + fmt(w256_128.p_value) +
             " d " + fmt(d256_128) + "; 256v64 p " + fmt(w256_64.p_value) + " d " + fmt(d256_64) +
             " (exact p " + fmt(e1) + "/" + fmt(e2) + "/" + fmt(e3) + ")");
}

// ---------------------------------------------------------------- 7

void criterion_grid() {
  Verdict v;
  SweepConfig sweep;
  sweep.datasets = {"ItalyPowerDemand", "GunPoint"};
  sweep.resolutions = {64, 128, 256};
  sweep.repeats = 1;
  const auto runs = expand_grid(sweep);
  std::map<std::pair<std::string, int>, int> per;
  std::set<std::string> ids;
  for (const auto& r : runs) {
    ++per[{r.dataset, r.resolution}];
    ids.insert(r.id());
  }
  v.require(per.size() == 6, "dataset x resolution cells");
  for (const auto& [k, n] : per) v.require(n == 16, k.first + "@" + std::to_string(k.second) + " has " + std::to_string(n));
  v.require(ids.size() == runs.size(), "duplicate run ids");

  sweep.repeats.reset();
  const auto repeated = expand_grid(sweep);
  v.require(repeated.size() == runs.size() * 10, "auto repeats");

  const fs::path dir = fs::temp_directory_path() / ("vtb_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  ExecuteOptions opts;
  opts.data_root = fs::path(VTB_DATA_DIR) / "ucr";
  opts.cache_dir = dir / "cache";
  opts.results_path = dir / "results.jsonl";
  opts.render_first = false;
  std::size_t calls = 0;
  opts.runner = [&](const RunConfig& cfg) {
    ++calls;
    RunRecord rec;
    rec.run_id = cfg.id();
    rec.config = cfg.to_json();
    rec.seed = cfg.train.seed;
    rec.test.accuracy = 0.5;
    return rec;
  };
  const auto first = execute(runs, opts);
  const auto second = execute(runs, opts);
  v.require(first.executed == runs.size() && first.failed == 0, "first sweep executed " + std::to_string(first.executed));
  v.require(second.executed == 0 && second.skipped == runs.size(), "second sweep executed " + std::to_string(second.executed));
  v.require(calls == runs.size(), "runner calls");
  fs::remove_all(dir);
  report(7, v, std::to_string(runs.size()) + " runs (16 per dataset x resolution); resume executed " +
                   std::to_string(second.executed) + ", skipped " + std::to_string(second.skipped));
}

// ---------------------------------------------------------------- 8

void criterion_params() {
  Verdict v;
  auto count = [](nn::EncoderKind kind) {
    nn::ParamStore store;
    Rng rng(0);
    nn::EncoderConfig cfg;
    cfg.kind = kind;
    cfg.resolution = 64;
    nn::make_encoder(cfg, store, "enc", rng);
    return store.parameter_count();
  };
  const auto shallow = count(nn::EncoderKind::shallow_cnn);
  const auto deep = count(nn::EncoderKind::deep_cnn);
  // conv 3x3 + bias + bn affine per block, then the dense layers
  auto block = [](std::size_t cin, std::size_t cout) { return cout * cin * 9 + cout + 2 * cout; };
  const std::size_t shallow_oracle = block(3, 16) + block(16, 32) + block(32, 64) + (64 * 8 * 8) * 64 + 64;
  const std::size_t deep_oracle = block(3, 16) + block(16, 32) + block(32, 64) + block(64, 128) + block(128, 256) +
                                  (256 * 2 * 2) * 512 + 512 + 512 * 256 + 256;
  v.require(shallow == shallow_oracle, "shallow count " + std::to_string(shallow));
  v.require(deep == deep_oracle, "deep count " + std::to_string(deep));
  const double rs = static_cast<double>(shallow) / 286e3 - 1.0;
  const double rd = static_cast<double>(deep) / 1.2e6 - 1.0;
  v.require(std::abs(rs) <= 0.05, "shallow off by " + fmt(100 * rs, 1) + "%");
  v.require(std::abs(rd) <= 0.20, "deep off by " + fmt(100 * rd, 1) + "%");
  report(8, v, "ShallowCNN@64 " + std::to_string(shallow) + " (" + fmt(100 * rs, 1) + "% vs 286K), DeepCNN@64 " +
                   std::to_string(deep) + " (" + fmt(100 * rd, 1) + "% vs 1.2M)");
}

// ---------------------------------------------------------------- 9

// Two-sided p by listing every sign pattern of the ranked differences.
double enumeration_p(const std::vector<double>& d) {
  std::vector<double> absd;
  for (double x : d) {
    if (x != 0.0) absd.push_back(std::abs(x));
  }
  const std::size_t n = absd.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      below += absd[j] < absd[i];
      equal += absd[j] == absd[i];
    }
    rank[i] = below + (equal + 1) / 2.0;
  }
  double w_plus = 0.0, total = 0.0;
  {
    std::size_t i = 0;
    for (double x : d) {
      if (x == 0.0) continue;
      if (x > 0) w_plus += rank[i];
      total += rank[i];
      ++i;
    }
  }
  const double observed = std::min(w_plus, total - w_plus);
  std::size_t extreme = 0;
  const std::size_t patterns = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) w += rank[i];
    }
    if (std::min(w, total - w) <= observed + 1e-9) ++extreme;
  }
  return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(patterns));
}

void criterion_exact_stats() {
  Verdict v;
  Rng rng(9);
  std::size_t wil = 0;
  double worst_p = 0.0;
  stats::WilcoxonOptions exact;
  exact.method = stats::WilcoxonMethod::exact;
  for (std::size_t n = 1; n <= 10; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> x(n), y(n), d(n);
      const bool ties = rep % 2 == 1;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = ties ? static_cast<double>(rng.below(5)) : rng.normal();
        y[i] = ties ? static_cast<double>(rng.below(5)) : rng.normal();
        d[i] = x[i] - y[i];
      }
      if (std::all_of(d.begin(), d.end(), [](double z) { return z == 0.0; })) continue;
      const double p = stats::wilcoxon_signed_rank(x, y, exact).p_value;
      const double oracle = enumeration_p(d);
      worst_p = std::max(worst_p, std::abs(p - oracle));
      ++wil;
    }
  }
  v.require(worst_p < 1e-9, "wilcoxon max |p - oracle| " + std::to_string(worst_p));

  double worst_d = 0.0;
  for (int f = 0; f < 100; ++f) {
    const std::size_t na = 1 + rng.below(30), nb = 1 + rng.below(30);
    std::vector<double> a(na), b(nb);
    const bool ties = f % 3 == 0;
    for (auto& z : a) z = ties ? static_cast<double>(rng.below(6)) : rng.normal();
    for (auto& z : b) z = ties ? static_cast<double>(rng.below(6)) : rng.normal() + 0.3;
    double s = 0.0;
    for (double p : a) {
      for (double q : b) s += (p > q) - (p < q);
    }
    const double oracle = s / static_cast<double>(na * nb);
    worst_d = std::max(worst_d, std::abs(stats::cliffs_delta(a, b).delta - oracle));
  }
  v.require(worst_d < 1e-12, "cliffs max error " + std::to_string(worst_d));
  report(9, v, std::to_string(wil) + " Wilcoxon fixtures n<=10 (max |dp| " + std::to_string(worst_p) +
                   "), 100 Cliff's delta fixtures (max err " + std::to_string(worst_d) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  const std::vector<std::pair<int, std::function<void()>>> all{
      {1, criterion_gradients},   {2, criterion_rasterizer},      {3, criterion_accuracy},
      {4, criterion_simplex},     {5, criterion_complementarity}, {6, criterion_table_stats},
      {7, criterion_grid},        {8, criterion_params},          {9, criterion_exact_stats}};
  for (const auto& [n, fn] : all) {
    if (!only.empty() && !only.count(n)) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      ++g_failures;
      std::cout << "criterion " << n << ": FAIL  exception: " << e.what() << std::endl;
    }
  }
  return g_failures == 0 ? 0 : 1;
}
