#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vtb/run.hpp"
#include "vtb/stats.hpp"

namespace vtb {

// Plain string table rendered as CSV or Markdown.
struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  std::string to_markdown() const;
};

std::string format_fixed(double v, int digits = 3);

// Mean test accuracy per experiment cell (over seeds), successful runs only.
struct CellSummary {
  RunConfig config;  // seed of the first run seen
  double mean_accuracy = 0.0;
  std::size_t runs = 0;
  int num_classes = 0;
};
std::vector<CellSummary> summarize_cells(const std::vector<RunRecord>& records);

// Short readable name of a cell, e.g. "single_chart/line_mono_no_label_128/deep_cnn".
std::string method_label(const RunConfig& cfg);

inline constexpr double kDefaultDeltaThreshold = 0.03;

struct DeltaRow {
  std::string dataset;
  std::optional<double> best_single;
  std::string best_single_setting;
  std::optional<double> multimodal;
  std::string multimodal_setting;
  std::optional<double> delta;  // multimodal - best single
  std::string group;            // Improving | Almost Same | Degrading | incomplete
  bool complete = false;
};

std::string delta_group(double delta, double theta = kDefaultDeltaThreshold);
std::vector<DeltaRow> report_delta_table(const std::vector<RunRecord>& records,
                                         double theta = kDefaultDeltaThreshold);
Table delta_table(const std::vector<DeltaRow>& rows);

struct SettingMatrix {
  ChartType chart_type = ChartType::line;
  int resolution = 128;
  std::string backbone;
  std::vector<std::string> datasets;
  std::vector<std::array<std::optional<double>, 4>> accuracy;  // setting_variants order
};

struct AggregateRow {
  ChartType chart_type = ChartType::line;
  std::string task;  // binary | multiclass
  std::size_t datasets = 0;
  double mean = 0.0;
  std::optional<double> half_width;  // needs at least 2 datasets
};

struct SettingReport {
  std::vector<SettingMatrix> matrices;
  std::vector<AggregateRow> aggregate;
};

// Single-chart cells arranged per chart type across the four rendering
// settings, plus the per-type mean +- 95% CI over datasets split by task type.
// A dataset's value for the aggregate is its mean over available settings.
SettingReport report_setting_matrix(const std::vector<RunRecord>& records);
std::vector<Table> setting_tables(const SettingReport& rep);

// Dataset x method accuracy matrix.
struct AccuracyMatrix {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::vector<std::vector<std::optional<double>>> acc;
};

AccuracyMatrix matrix_from_results(const std::vector<RunRecord>& records);
// CSV with header "dataset,<method>,..."; empty cells are missing values.
AccuracyMatrix read_matrix_csv(const std::filesystem::path& file);
AccuracyMatrix parse_matrix_csv(const std::string& text);

Table rank_table(const AccuracyMatrix& m);
// Pairwise Wilcoxon signed-rank and Cliff's delta over datasets where both
// methods have a value.
Table pairwise_stats_table(const AccuracyMatrix& m, const stats::WilcoxonOptions& opts = {});

}  // namespace vtb
