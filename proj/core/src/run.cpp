#include "vtb/run.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>

#include "vtb/hash.hpp"
#include "vtb/render_cache.hpp"

namespace vtb {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ChartSpec> RunConfig::chart_specs() const {
  if (architecture == Architecture::single_chart) {
    ChartSpec s;
    s.chart_type = chart_type;
    s.color_mode = color_mode;
    s.label_mode = label_mode;
    s.resolution = resolution;
    return {s};
  }
  std::vector<ChartSpec> out;
  for (auto t : kAllChartTypes) {
    ChartSpec s;
    s.chart_type = t;
    s.color_mode = color_mode;
    s.label_mode = label_mode;
    s.resolution = resolution;
    out.push_back(s);
  }
  return out;
}

ModelConfig RunConfig::model_config(int num_classes, std::size_t length) const {
  ModelConfig m;
  m.charts = chart_specs();
  m.numeric = architecture == Architecture::multimodal;
  m.backbone = backbone;
  m.numeric_encoder.kind = numeric_encoder;
  m.fusion.strategy = architecture == Architecture::single_chart ? nn::FusionStrategy::concat : fusion;
  m.num_classes = num_classes;
  m.length = length;
  return m;
}

json RunConfig::cell_json() const {
  json j = to_json();
  j["train"].erase("seed");
  return j;
}

json RunConfig::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["architecture"] = to_string(architecture);
  if (architecture == Architecture::single_chart) j["chart_type"] = vtb::to_string(chart_type);
  j["color_mode"] = vtb::to_string(color_mode);
  j["label_mode"] = vtb::to_string(label_mode);
  j["resolution"] = resolution;
  j["backbone"] = nn::to_string(backbone);
  if (architecture == Architecture::multimodal) j["numeric_encoder"] = nn::to_string(numeric_encoder);
  if (architecture != Architecture::single_chart) j["fusion"] = nn::to_string(fusion);
  j["train"] = train;
  j["val_fraction"] = val_fraction;
  j["split_seed"] = split_seed;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.dataset = j.at("dataset").get<std::string>();
  c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  if (j.contains("chart_type")) c.chart_type = parse_chart_type(j["chart_type"].get<std::string>());
  c.color_mode = parse_color_mode(j.at("color_mode").get<std::string>());
  c.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
  c.resolution = j.at("resolution").get<int>();
  c.backbone = nn::parse_encoder_kind(j.at("backbone").get<std::string>());
  if (j.contains("numeric_encoder")) c.numeric_encoder = nn::parse_encoder_kind(j["numeric_encoder"].get<std::string>());
  if (j.contains("fusion")) c.fusion = nn::parse_fusion(j["fusion"].get<std::string>());
  c.train = j.at("train").get<TrainConfig>();
  c.val_fraction = j.value("val_fraction", 0.2);
  c.split_seed = j.value("split_seed", std::uint64_t{0});
  return c;
}

std::string RunConfig::cell_key() const { return sha256_hex(cell_json().dump()); }

std::string RunConfig::id() const { return sha256_hex(to_json().dump()); }

json RunRecord::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["config"] = config;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["history"] = history;
  j["best_epoch"] = best_epoch;
  j["test"] = test;
  j["validation"] = validation;
  j["num_classes"] = num_classes;
  j["alpha"] = alpha;
  j["wall_seconds"] = wall_seconds;
  j["seed"] = seed;
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.config = j.at("config");
  r.status = j.value("status", std::string("ok"));
  r.error = j.value("error", std::string());
  if (j.contains("history")) r.history = j["history"].get<std::vector<EpochStats>>();
  r.best_epoch = j.value("best_epoch", 0);
  if (j.contains("test")) r.test = j["test"].get<Metrics>();
  if (j.contains("validation")) r.validation = j["validation"].get<Metrics>();
  r.num_classes = j.value("num_classes", 0);
  if (j.contains("alpha")) r.alpha = j["alpha"].get<std::vector<std::vector<double>>>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.seed = j.value("seed", std::uint64_t{0});
  return r;
}

RunRecord run_single(const RunConfig& cfg, const RunContext& ctx) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg.to_json();
  rec.run_id = cfg.id();
  rec.seed = cfg.train.seed;
  try {
    const UcrDataset data = load_ucr_dataset(ctx.data_root, cfg.dataset);
    const auto specs = cfg.chart_specs();
    if (ctx.cache_root) {
      render_cache(data.train, "train", specs, *ctx.cache_root);
      render_cache(data.test, "test", specs, *ctx.cache_root);
    }
    const SampleSet train_set = build_samples(data.train, specs, ctx.cache_root, "train");
    const SampleSet archive_test = build_samples(data.test, specs, ctx.cache_root, "test");
    const auto split = stratified_holdout_indices(archive_test.labels, cfg.val_fraction, cfg.split_seed);
    const SampleSet val_set = subset(archive_test, split.held);
    const SampleSet test_set = subset(archive_test, split.rest);
    rec.num_classes = data.train.meta.num_classes;

    MultiBranchClassifier model(cfg.model_config(rec.num_classes, data.train.meta.length), cfg.train.seed);
    const TrainResult tr = train(model, train_set, val_set, cfg.train);
    rec.history = tr.history;
    rec.best_epoch = tr.best_epoch;
    rec.validation = evaluate(model, val_set);
    const EvalOutput test = evaluate_detailed(model, test_set);
    rec.test = test.metrics;
    rec.alpha = test.alpha;
    if (ctx.checkpoint_dir) {
      fs::create_directories(*ctx.checkpoint_dir);
      model.params().save(*ctx.checkpoint_dir / (rec.run_id + ".ckpt"));
    }
  } catch (const DivergenceError& e) {
    rec.status = "failed";
    rec.error = e.what();
    rec.history = e.history();
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

int default_repeats(Architecture a) { return a == Architecture::single_chart ? 10 : 3; }

ResultsWriter::ResultsWriter(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

void ResultsWriter::append(const RunRecord& rec) {
  const std::string line = rec.to_json().dump() + "\n";
  std::lock_guard lock(mu_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open results file " + path_.string());
  const ssize_t n = ::write(fd, line.data(), line.size());
  ::fsync(fd);
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size())) throw std::runtime_error("short write to " + path_.string());
}

std::vector<RunRecord> read_results(const fs::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("run_id")) continue;
    try {
      out.push_back(RunRecord::from_json(j));
    } catch (const json::exception&) {
    }
  }
  return out;
}

std::set<std::string> completed_run_ids(const fs::path& path) {
  std::set<std::string> ids;
  for (const auto& r : read_results(path)) {
    if (r.ok()) ids.insert(r.run_id);
  }
  return ids;
}

RepeatSummary run_repeats(const RunConfig& cfg, int n_runs, std::uint64_t base_seed, const RunFn& fn,
                          ResultsWriter* writer) {
  if (n_runs < 1) throw std::invalid_argument("run_repeats needs n_runs >= 1");
  RepeatSummary s;
  for (int i = 0; i < n_runs; ++i) {
    RunConfig c = cfg;
    c.train.seed = base_seed + static_cast<std::uint64_t>(i);
    RunRecord r = fn(c);
    if (writer) writer->append(r);
    s.runs.push_back(std::move(r));
  }
  auto stat = [&](auto field, double& mean, double& sd) {
    double sum = 0.0;
    for (const auto& r : s.runs) sum += r.test.*field;
    mean = sum / n_runs;
    double sq = 0.0;
    for (const auto& r : s.runs) sq += (r.test.*field - mean) * (r.test.*field - mean);
    sd = n_runs > 1 ? std::sqrt(sq / (n_runs - 1)) : 0.0;
  };
  stat(&Metrics::accuracy, s.mean.accuracy, s.std.accuracy);
  stat(&Metrics::macro_f1, s.mean.macro_f1, s.std.macro_f1);
  stat(&Metrics::auc, s.mean.auc, s.std.auc);
  return s;
}

}  // namespace vtb
