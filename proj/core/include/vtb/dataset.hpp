#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vtb {

struct TimeSeriesInstance {
  std::vector<float> values;
  int label = 0;
};

// Raw archive labels in ascending order; position i is the contiguous label i.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<double> sorted_raw);

  int to_index(double raw) const;  // throws DatasetError if unknown
  double to_raw(int index) const { return raw_.at(static_cast<std::size_t>(index)); }
  int num_classes() const { return static_cast<int>(raw_.size()); }
  const std::vector<double>& raw_labels() const { return raw_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<double> raw_;
};

struct DatasetMeta {
  std::string name;
  std::size_t length = 0;  // T
  int num_classes = 0;     // C
  LabelMap label_map;
  std::map<std::string, std::size_t> split_counts;
};

struct LabeledSeriesSet {
  std::vector<TimeSeriesInstance> instances;
  DatasetMeta meta;

  std::size_t size() const { return instances.size(); }
  std::vector<int> labels() const;
};

enum class Split { train, test };
const char* to_string(Split s);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed row in a .tsv file. `row` is zero-based.
class ParseError : public DatasetError {
 public:
  ParseError(std::filesystem::path file, std::size_t row, const std::string& what);
  std::size_t row() const { return row_; }
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
  std::size_t row_;
};

// Distinct raw labels sorted ascending receive 0..C-1.
std::pair<std::vector<int>, LabelMap> remap_labels(std::span<const double> raw);

std::filesystem::path ucr_split_path(const std::filesystem::path& root, const std::string& name,
                                     Split split);

// Loads `<root>/<name>/<name>_{TRAIN|TEST}.tsv`. The label map is always
// derived from the TRAIN file so both splits share contiguous labels.
LabeledSeriesSet load_ucr_split(const std::filesystem::path& root, const std::string& name,
                                Split split);

struct UcrDataset {
  LabeledSeriesSet train;
  LabeledSeriesSet test;
};
UcrDataset load_ucr_dataset(const std::filesystem::path& root, const std::string& name);

// Writes the set back in archive layout using the original raw labels.
void write_ucr_split(const std::filesystem::path& file, const LabeledSeriesSet& set);

struct HoldoutIndices {
  std::vector<std::size_t> held;
  std::vector<std::size_t> rest;
};

// Per class, round-half-up(fraction * n_c) indices are held out after a seeded
// shuffle of that class's members. Both outputs are sorted ascending.
HoldoutIndices stratified_holdout_indices(std::span<const int> labels, double fraction,
                                          std::uint64_t seed);

std::pair<LabeledSeriesSet, LabeledSeriesSet> stratified_holdout(const LabeledSeriesSet& set,
                                                                 double fraction,
                                                                 std::uint64_t seed);

LabeledSeriesSet subset(const LabeledSeriesSet& set, std::span<const std::size_t> indices);

// Resolves the data root: explicit value first, then VTB_DATA_ROOT.
std::filesystem::path resolve_data_root(const std::string& explicit_root);

}  // namespace vtb
