#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "vtb/experiment.hpp"

namespace vtb {

// Carries the JSON path of the offending key, e.g. "sweep.resolutions[1]".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what), key_path_(std::move(key_path)) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

// One experiment cell as written in a config file (the seed included).
struct RunSpec {
  std::string dataset;
  Architecture architecture = Architecture::single_chart;
  ChartType chart_type = ChartType::line;
  ColorMode color_mode = ColorMode::mono;
  LabelMode label_mode = LabelMode::no_label;
  int resolution = 128;
  nn::EncoderKind backbone = nn::EncoderKind::deep_cnn;
  nn::EncoderKind numeric_encoder = nn::EncoderKind::fcn;
  nn::FusionStrategy fusion = nn::FusionStrategy::concat;
  std::uint64_t seed = 0;
};

struct AppConfig {
  std::string data_root;  // empty: VTB_DATA_ROOT
  std::string cache_dir = "vtb_cache";
  std::string results_path = "vtb_results/results.jsonl";
  std::string checkpoint_dir;  // empty: no checkpoints
  unsigned workers = 1;
  double theta = 0.03;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  SweepConfig sweep;  // its train / val_fraction / split_seed mirror the top level
  std::optional<RunSpec> run;

  RunConfig run_config() const;  // requires `run`
  SweepConfig sweep_config() const;
};

// Unknown keys and wrongly typed values are rejected with their key path.
AppConfig parse_app_config(const nlohmann::json& j);
AppConfig load_app_config(const std::filesystem::path& file);
nlohmann::json app_config_to_json(const AppConfig& c);

}  // namespace vtb
