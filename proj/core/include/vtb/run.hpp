#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtb/train.hpp"

namespace vtb {

// One fully bound experiment cell plus its seed (train.seed).
struct RunConfig {
  std::string dataset;
  Architecture architecture = Architecture::single_chart;
  ChartType chart_type = ChartType::line;  // single_chart only
  ColorMode color_mode = ColorMode::mono;
  LabelMode label_mode = LabelMode::no_label;
  int resolution = 128;
  nn::EncoderKind backbone = nn::EncoderKind::deep_cnn;
  nn::EncoderKind numeric_encoder = nn::EncoderKind::fcn;  // multimodal only
  nn::FusionStrategy fusion = nn::FusionStrategy::concat;  // multi-branch only
  TrainConfig train;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;

  // Chart branches: one spec for single_chart, all four types otherwise.
  std::vector<ChartSpec> chart_specs() const;
  ModelConfig model_config(int num_classes, std::size_t length) const;

  // Canonical form; fields that do not apply to the architecture are left out.
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // Same as to_json() without the seed; identifies the cell across repeats.
  nlohmann::json cell_json() const;
  std::string cell_key() const;
  // sha256 of the canonical JSON.
  std::string id() const;
};

struct RunRecord {
  std::string run_id;
  nlohmann::json config;
  std::string status = "ok";  // ok | failed
  std::string error;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  Metrics test;
  Metrics validation;
  int num_classes = 0;
  std::vector<std::vector<double>> alpha;  // per test batch
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  bool ok() const { return status == "ok"; }
  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

struct RunContext {
  std::filesystem::path data_root;
  std::optional<std::filesystem::path> cache_root;  // read charts from here if set
  std::optional<std::filesystem::path> checkpoint_dir;
};

// Loads the data, splits the archive TEST set into validation and test,
// trains and evaluates one cell. Failures are reported in the record.
RunRecord run_single(const RunConfig& cfg, const RunContext& ctx);

using RunFn = std::function<RunRecord(const RunConfig&)>;

// 10 seeds for single-chart cells, 3 for multi-branch ones.
int default_repeats(Architecture a);

// Appends one JSON line per record under a lock, each with a single write.
class ResultsWriter {
 public:
  explicit ResultsWriter(std::filesystem::path path);
  void append(const RunRecord& rec);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

// Records from a results file; malformed (torn) lines are ignored.
std::vector<RunRecord> read_results(const std::filesystem::path& path);
std::set<std::string> completed_run_ids(const std::filesystem::path& path);

struct RepeatSummary {
  Metrics mean;
  Metrics std;  // sample standard deviation, 0 for a single run
  std::vector<RunRecord> runs;
};

// Runs seeds base_seed + i for i < n_runs; each record is appended to
// `writer` when given.
RepeatSummary run_repeats(const RunConfig& cfg, int n_runs, std::uint64_t base_seed, const RunFn& fn,
                          ResultsWriter* writer = nullptr);

}  // namespace vtb
