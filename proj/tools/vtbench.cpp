#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "vtb/config.hpp"
#include "vtb/dataset.hpp"
#include "vtb/experiment.hpp"
#include "vtb/render_cache.hpp"
#include "vtb/report.hpp"
#include "vtb/selfcheck.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInterrupted = 130;

// Flag values; only options given on the command line are applied.
struct Flags {
  std::string config;
  std::string data_root, cache_dir, results_path, checkpoint_dir;
  unsigned workers = 1;
  double theta = 0, val_fraction = 0;
  std::uint64_t split_seed = 0;

  double lr = 0, weight_decay = 0, plateau_factor = 0, min_lr = 0;
  bool decoupled = false;
  int patience = 0, plateau_patience = 0, max_epochs = 0, batch_size = 0;

  std::string dataset, architecture, chart_type, color_mode, label_mode, backbone, numeric_encoder, fusion;
  int resolution = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> datasets, chart_types, color_modes, label_modes, architectures, fusions, numeric_encoders,
      backbones;
  std::vector<int> resolutions;
  std::string repeats;
  std::uint64_t base_seed = 0;

  std::string results_in, matrix, format = "md", output;
};

struct Options {
  std::multimap<std::string, CLI::Option*> by_key;
  bool given(const std::string& key) const {
    const auto [lo, hi] = by_key.equal_range(key);
    return std::any_of(lo, hi, [](const auto& kv) { return kv.second->count() > 0; });
  }
};

template <typename T>
void add(CLI::App& app, Options& o, const std::string& key, const std::string& flag, T& target,
         const std::string& help) {
  o.by_key.emplace(key, app.add_option(flag, target, help));
}

template <typename E, typename F>
void apply_enum(const Options& o, const std::string& key, const std::string& value, E& out, F parse) {
  if (!o.given(key)) return;
  try {
    out = parse(value);
  } catch (const std::invalid_argument& e) {
    throw vtb::ConfigError(key, e.what());
  }
}

template <typename E, typename F>
void apply_enum_list(const Options& o, const std::string& key, const std::vector<std::string>& values,
                     std::vector<E>& out, F parse) {
  if (!o.given(key)) return;
  out.clear();
  for (std::size_t i = 0; i < values.size(); ++i) {
    try {
      out.push_back(parse(values[i]));
    } catch (const std::invalid_argument& e) {
      throw vtb::ConfigError(key + "[" + std::to_string(i) + "]", e.what());
    }
  }
}

vtb::AppConfig build_config(const Flags& f, const Options& o) {
  vtb::AppConfig c = f.config.empty() ? vtb::AppConfig{} : vtb::load_app_config(f.config);
  auto set = [&](const std::string& key, auto& dst, const auto& src) {
    if (o.given(key)) dst = src;
  };
  set("data_root", c.data_root, f.data_root);
  set("cache_dir", c.cache_dir, f.cache_dir);
  set("results_path", c.results_path, f.results_path);
  set("checkpoint_dir", c.checkpoint_dir, f.checkpoint_dir);
  set("workers", c.workers, f.workers);
  set("theta", c.theta, f.theta);
  set("val_fraction", c.val_fraction, f.val_fraction);
  set("split_seed", c.split_seed, f.split_seed);
  set("train.lr", c.train.lr, f.lr);
  set("train.weight_decay", c.train.weight_decay, f.weight_decay);
  set("train.decoupled_weight_decay", c.train.decoupled_weight_decay, f.decoupled);
  set("train.patience", c.train.patience, f.patience);
  set("train.plateau_patience", c.train.plateau_patience, f.plateau_patience);
  set("train.plateau_factor", c.train.plateau_factor, f.plateau_factor);
  set("train.min_lr", c.train.min_lr, f.min_lr);
  set("train.max_epochs", c.train.max_epochs, f.max_epochs);
  set("train.batch_size", c.train.batch_size, f.batch_size);

  if (c.workers < 1) throw vtb::ConfigError("workers", "must be >= 1");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) throw vtb::ConfigError("val_fraction", "must be in (0,1)");
  try {
    c.train.validate();
  } catch (const std::invalid_argument& e) {
    throw vtb::ConfigError("train", e.what());
  }

  bool any_run = false;
  for (const auto& [k, opt] : o.by_key) any_run |= k.rfind("run.", 0) == 0 && opt->count() > 0;
  if (any_run && !c.run) c.run.emplace();
  if (c.run) {
    auto& r = *c.run;
    set("run.dataset", r.dataset, f.dataset);
    apply_enum(o, "run.architecture", f.architecture, r.architecture, vtb::parse_architecture);
    apply_enum(o, "run.chart_type", f.chart_type, r.chart_type, vtb::parse_chart_type);
    apply_enum(o, "run.color_mode", f.color_mode, r.color_mode, vtb::parse_color_mode);
    apply_enum(o, "run.label_mode", f.label_mode, r.label_mode, vtb::parse_label_mode);
    set("run.resolution", r.resolution, f.resolution);
    apply_enum(o, "run.backbone", f.backbone, r.backbone, vtb::nn::parse_encoder_kind);
    apply_enum(o, "run.numeric_encoder", f.numeric_encoder, r.numeric_encoder, vtb::nn::parse_encoder_kind);
    apply_enum(o, "run.fusion", f.fusion, r.fusion, vtb::nn::parse_fusion);
    set("run.seed", r.seed, f.seed);
    if (r.dataset.empty()) throw vtb::ConfigError("run.dataset", "required");
  }

  auto& s = c.sweep;
  set("sweep.datasets", s.datasets, f.datasets);
  apply_enum_list(o, "sweep.chart_types", f.chart_types, s.chart_types, vtb::parse_chart_type);
  apply_enum_list(o, "sweep.color_modes", f.color_modes, s.color_modes, vtb::parse_color_mode);
  apply_enum_list(o, "sweep.label_modes", f.label_modes, s.label_modes, vtb::parse_label_mode);
  apply_enum_list(o, "sweep.architectures", f.architectures, s.architectures, vtb::parse_architecture);
  apply_enum_list(o, "sweep.fusions", f.fusions, s.fusions, vtb::nn::parse_fusion);
  apply_enum_list(o, "sweep.numeric_encoders", f.numeric_encoders, s.numeric_encoders, vtb::nn::parse_encoder_kind);
  apply_enum_list(o, "sweep.backbones", f.backbones, s.backbones, vtb::nn::parse_encoder_kind);
  set("sweep.resolutions", s.resolutions, f.resolutions);
  set("sweep.base_seed", s.base_seed, f.base_seed);
  if (o.given("sweep.repeats")) {
    if (f.repeats == "auto") {
      s.repeats.reset();
    } else {
      try {
        const int n = std::stoi(f.repeats);
        if (n < 1) throw std::invalid_argument("");
        s.repeats = n;
      } catch (const std::exception&) {
        throw vtb::ConfigError("sweep.repeats", "expected \"auto\" or a positive integer");
      }
    }
  }
  return c;
}

std::filesystem::path data_root(const vtb::AppConfig& c) {
  const auto root = vtb::resolve_data_root(c.data_root);
  if (!std::filesystem::is_directory(root)) throw vtb::ConfigError("data_root", "not a directory: " + root.string());
  return root;
}

vtb::SweepConfig checked_sweep(const vtb::AppConfig& c) {
  auto s = c.sweep_config();
  try {
    s.validate();
  } catch (const vtb::GridError& e) {
    throw vtb::ConfigError("sweep", e.what());
  }
  return s;
}

int cmd_render(const vtb::AppConfig& c) {
  const auto root = data_root(c);
  std::vector<vtb::RunConfig> runs;
  if (c.run) {
    runs.push_back(c.run_config());
  } else {
    runs = vtb::expand_grid(checked_sweep(c));
  }
  std::map<std::string, std::vector<vtb::ChartSpec>> needed;
  for (const auto& r : runs) {
    auto& specs = needed[r.dataset];
    for (const auto& s : r.chart_specs()) {
      if (std::find(specs.begin(), specs.end(), s) == specs.end()) specs.push_back(s);
    }
  }
  std::size_t rendered = 0, skipped = 0;
  for (const auto& [name, specs] : needed) {
    if (g_stop) return kExitInterrupted;
    const auto data = vtb::load_ucr_dataset(root, name);
    for (const auto& [split, set] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
      const auto m = vtb::render_cache(*set, split, specs, c.cache_dir, c.workers);
      rendered += m.rendered;
      skipped += m.skipped;
      std::cout << name << "/" << split << ": " << m.records.size() << " charts (" << m.rendered << " rendered, "
                << m.skipped << " up to date)\n";
    }
  }
  std::cout << "total: " << rendered << " rendered, " << skipped << " up to date\n";
  return 0;
}

int cmd_train(const vtb::AppConfig& c) {
  if (!c.run) throw vtb::ConfigError("run", "train needs a run cell (config \"run\" or --dataset)");
  const auto cfg = c.run_config();
  vtb::RunContext ctx{data_root(c), std::filesystem::path(c.cache_dir), std::nullopt};
  if (!c.checkpoint_dir.empty()) ctx.checkpoint_dir = std::filesystem::path(c.checkpoint_dir);
  const auto rec = vtb::run_single(cfg, ctx);
  vtb::ResultsWriter(c.results_path).append(rec);
  std::cout << "run " << rec.run_id << " (" << vtb::method_label(cfg) << ", seed " << rec.seed << ")\n";
  if (!rec.ok()) {
    std::cout << "status: failed: " << rec.error << "\n";
    return kExitFailure;
  }
  std::cout << "epochs: " << rec.history.size() << ", best epoch " << rec.best_epoch << "\n"
            << "validation: " << nlohmann::json(rec.validation).dump() << "\n"
            << "test:       " << nlohmann::json(rec.test).dump() << "\n";
  return 0;
}

int cmd_sweep(const vtb::AppConfig& c) {
  const auto runs = vtb::expand_grid(checked_sweep(c));
  vtb::ExecuteOptions opts;
  opts.data_root = data_root(c);
  opts.cache_dir = c.cache_dir;
  opts.results_path = c.results_path;
  opts.workers = c.workers;
  opts.stop = &g_stop;
  const auto rep = vtb::execute(runs, opts);
  std::cout << "runs: " << rep.total << " total, " << rep.skipped << " already done, " << rep.executed
            << " executed, " << rep.failed << " failed\n"
            << "charts rendered: " << rep.charts_rendered << "\n";
  for (const auto& [id, err] : rep.failures) std::cout << "failed " << id << ": " << err << "\n";
  if (rep.interrupted) {
    std::cout << "interrupted; rerun to resume\n";
    return kExitInterrupted;
  }
  return rep.failed == 0 ? 0 : kExitFailure;
}

int cmd_report(const vtb::AppConfig& c, const Flags& f, const std::string& kind) {
  if (f.format != "md" && f.format != "csv") throw vtb::ConfigError("format", "expected md or csv");
  const std::string results = f.results_in.empty() ? c.results_path : f.results_in;
  auto records = [&] {
    if (!std::filesystem::exists(results)) throw vtb::ConfigError("results_path", "no such file: " + results);
    return vtb::read_results(results);
  };
  auto matrix = [&] { return f.matrix.empty() ? vtb::matrix_from_results(records()) : vtb::read_matrix_csv(f.matrix); };

  std::vector<vtb::Table> tables;
  bool complete = true;
  if (kind == "delta") {
    const auto rows = vtb::report_delta_table(records(), c.theta);
    for (const auto& r : rows) complete &= r.complete;
    tables.push_back(vtb::delta_table(rows));
  } else if (kind == "settings") {
    tables = vtb::setting_tables(vtb::report_setting_matrix(records()));
  } else if (kind == "ranks") {
    tables.push_back(vtb::rank_table(matrix()));
  } else {
    const auto m = matrix();
    tables.push_back(vtb::rank_table(m));
    tables.push_back(vtb::pairwise_stats_table(m));
  }

  std::ofstream file;
  if (!f.output.empty()) {
    file.open(f.output);
    if (!file) throw std::runtime_error("cannot write " + f.output);
  }
  std::ostream& out = f.output.empty() ? std::cout : file;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) out << "\n";
    out << (f.format == "csv" ? tables[i].to_csv() : tables[i].to_markdown());
  }
  if (!complete) std::cerr << "warning: some datasets lack single-chart or multimodal results\n";
  return 0;
}

int cmd_selfcheck() {
  bool ok = true;
  for (const auto& s : vtb::run_selfcheck()) {
    std::cout << (s.passed ? "PASS " : "FAIL ") << s.name << ": " << s.detail << "\n";
    ok &= s.passed;
  }
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time series classification from chart images and raw values"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  Options o;

  app.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  add(app, o, "data_root", "--data-root", f.data_root, "UCR archive root (default: $VTB_DATA_ROOT)");
  add(app, o, "cache_dir", "--cache-dir", f.cache_dir, "Chart image cache");
  add(app, o, "results_path", "--results-path", f.results_path, "Results JSONL file");
  add(app, o, "checkpoint_dir", "--checkpoint-dir", f.checkpoint_dir, "Save best weights here (train)");
  add(app, o, "workers", "--workers", f.workers, "Worker threads");
  add(app, o, "theta", "--theta", f.theta, "Delta threshold for report groups");
  add(app, o, "val_fraction", "--val-fraction", f.val_fraction, "Validation share of the archive test split");
  add(app, o, "split_seed", "--split-seed", f.split_seed, "Seed of the validation holdout");
  add(app, o, "train.lr", "--lr", f.lr, "Adam learning rate");
  add(app, o, "train.weight_decay", "--weight-decay", f.weight_decay, "L2 weight decay");
  o.by_key.emplace("train.decoupled_weight_decay",
                   app.add_flag("--decoupled-weight-decay", f.decoupled, "Decoupled (AdamW style) weight decay"));
  add(app, o, "train.patience", "--patience", f.patience, "Early stopping patience (epochs)");
  add(app, o, "train.plateau_patience", "--plateau-patience", f.plateau_patience, "LR plateau patience");
  add(app, o, "train.plateau_factor", "--plateau-factor", f.plateau_factor, "LR decay factor");
  add(app, o, "train.min_lr", "--min-lr", f.min_lr, "LR floor");
  add(app, o, "train.max_epochs", "--max-epochs", f.max_epochs, "Epoch limit");
  add(app, o, "train.batch_size", "--batch-size", f.batch_size, "Mini-batch size");

  auto* render = app.add_subcommand("render", "Populate the chart cache");
  auto* train = app.add_subcommand("train", "Train and evaluate one cell");
  auto* sweep = app.add_subcommand("sweep", "Run the configured grid, skipping finished runs");
  auto* report = app.add_subcommand("report", "Tables from results or an accuracy matrix");
  auto* selfcheck = app.add_subcommand("selfcheck", "Gradient, rasterizer and statistics checks");

  for (auto* sub : {render, train}) {
    add(*sub, o, "run.dataset", "--dataset", f.dataset, "Dataset name");
    add(*sub, o, "run.architecture", "--architecture", f.architecture, "single_chart | multi_chart | multimodal");
    add(*sub, o, "run.chart_type", "--chart-type", f.chart_type, "line | area | bar | scatter");
    add(*sub, o, "run.color_mode", "--color-mode", f.color_mode, "mono | color");
    add(*sub, o, "run.label_mode", "--label-mode", f.label_mode, "with_label | no_label");
    add(*sub, o, "run.resolution", "--resolution", f.resolution, "Image side in pixels");
    add(*sub, o, "run.backbone", "--backbone", f.backbone, "shallow_cnn | deep_cnn");
    add(*sub, o, "run.numeric_encoder", "--numeric-encoder", f.numeric_encoder, "fcn | transformer | oscnn");
    add(*sub, o, "run.fusion", "--fusion", f.fusion, "concat | weighted");
    add(*sub, o, "run.seed", "--seed", f.seed, "Training seed");
  }
  for (auto* sub : {render, sweep}) {
    add(*sub, o, "sweep.datasets", "--datasets", f.datasets, "Datasets");
    add(*sub, o, "sweep.chart_types", "--chart-types", f.chart_types, "Chart types");
    add(*sub, o, "sweep.color_modes", "--color-modes", f.color_modes, "Color modes");
    add(*sub, o, "sweep.label_modes", "--label-modes", f.label_modes, "Label modes");
    add(*sub, o, "sweep.resolutions", "--resolutions", f.resolutions, "Resolutions");
    add(*sub, o, "sweep.architectures", "--architectures", f.architectures, "Architectures");
    add(*sub, o, "sweep.fusions", "--fusions", f.fusions, "Fusion strategies");
    add(*sub, o, "sweep.numeric_encoders", "--numeric-encoders", f.numeric_encoders, "Numeric encoders");
    add(*sub, o, "sweep.backbones", "--backbones", f.backbones, "Chart backbones");
    add(*sub, o, "sweep.repeats", "--repeats", f.repeats, "Seeds per cell, or auto");
    add(*sub, o, "sweep.base_seed", "--base-seed", f.base_seed, "First seed");
  }
  std::string report_kind;
  report->add_option("kind", report_kind, "delta | settings | ranks | stats")
      ->required()
      ->check(CLI::IsMember({"delta", "settings", "ranks", "stats"}));
  report->add_option("--results", f.results_in, "Results file (default: results_path)");
  report->add_option("--matrix", f.matrix, "Accuracy matrix CSV for ranks/stats")->check(CLI::ExistingFile);
  report->add_option("--format", f.format, "md | csv")->check(CLI::IsMember({"md", "csv"}));
  report->add_option("--output", f.output, "Write to this file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (selfcheck->parsed()) return cmd_selfcheck();
    const auto cfg = build_config(f, o);
    if (render->parsed()) return cmd_render(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    return cmd_report(cfg, f, report_kind);
  } catch (const vtb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
