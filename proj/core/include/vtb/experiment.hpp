#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtb/run.hpp"

namespace vtb {

struct SweepConfig {
  std::vector<std::string> datasets;
  std::vector<ChartType> chart_types{kAllChartTypes.begin(), kAllChartTypes.end()};
  std::vector<ColorMode> color_modes{ColorMode::mono, ColorMode::color};
  std::vector<LabelMode> label_modes{LabelMode::with_label, LabelMode::no_label};
  std::vector<int> resolutions{128};
  std::vector<Architecture> architectures{Architecture::single_chart};
  std::vector<nn::FusionStrategy> fusions{nn::FusionStrategy::concat};
  std::vector<nn::EncoderKind> numeric_encoders{nn::EncoderKind::fcn};
  std::vector<nn::EncoderKind> backbones{nn::EncoderKind::deep_cnn};
  std::optional<int> repeats;  // empty = 10 single-chart / 3 multi-branch
  std::uint64_t base_seed = 0;
  TrainConfig train;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SweepConfig& s);
void from_json(const nlohmann::json& j, SweepConfig& s);

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Ordered, duplicate-free runs. single_chart spans type x color x label x
// resolution x backbone; multi_chart binds all four types and spans fusion;
// multimodal additionally spans the numeric encoder. Each cell is repeated
// with seeds base_seed + i.
std::vector<RunConfig> expand_grid(const SweepConfig& sweep);

struct ExecuteOptions {
  std::filesystem::path data_root;
  std::filesystem::path cache_dir;
  std::filesystem::path results_path;
  unsigned workers = 1;
  bool render_first = true;
  RunFn runner;  // defaults to run_single with the cache
  const std::atomic<bool>* stop = nullptr;  // no new runs start once set
};

struct ExecuteReport {
  std::size_t total = 0;
  std::size_t skipped = 0;   // already in the results file
  std::size_t executed = 0;
  std::size_t failed = 0;
  std::size_t charts_rendered = 0;
  bool interrupted = false;
  std::vector<std::pair<std::string, std::string>> failures;  // run id, error
};

// Renders missing charts, then runs every config whose id is not yet in the
// results file. Per-run failures are recorded and the sweep continues.
ExecuteReport execute(const std::vector<RunConfig>& runs, const ExecuteOptions& opts);

}  // namespace vtb
