#include "vtb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vtb/rng.hpp"

namespace vtb {

namespace fs = std::filesystem;

LabelMap::LabelMap(std::vector<double> sorted_raw) : raw_(std::move(sorted_raw)) {}

int LabelMap::to_index(double raw) const {
  const auto it = std::lower_bound(raw_.begin(), raw_.end(), raw);
  if (it == raw_.end() || *it != raw) {
    std::ostringstream msg;
    msg << "label " << raw << " not present in the label map";
    throw DatasetError(msg.str());
  }
  return static_cast<int>(it - raw_.begin());
}

std::vector<int> LabeledSeriesSet::labels() const {
  std::vector<int> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.label);
  return out;
}

const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

ParseError::ParseError(fs::path file, std::size_t row, const std::string& what)
    : DatasetError(file.string() + ": row " + std::to_string(row) + ": " + what),
      file_(std::move(file)),
      row_(row) {}

std::pair<std::vector<int>, LabelMap> remap_labels(std::span<const double> raw) {
  std::vector<double> distinct(raw.begin(), raw.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    throw DatasetError("label set must contain at least 2 distinct labels, found " +
                       std::to_string(distinct.size()));
  }
  LabelMap map(std::move(distinct));
  std::vector<int> mapped;
  mapped.reserve(raw.size());
  for (double r : raw) mapped.push_back(map.to_index(r));
  return {std::move(mapped), std::move(map)};
}

fs::path ucr_split_path(const fs::path& root, const std::string& name, Split split) {
  return root / name / (name + (split == Split::train ? "_TRAIN.tsv" : "_TEST.tsv"));
}

namespace {

struct RawTable {
  std::vector<double> labels;
  std::vector<std::vector<float>> rows;
};

template <typename T>
bool parse_number(std::string_view token, T& out) {
  // from_chars rejects a leading '+', which some exporters emit.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

RawTable read_table(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DatasetError("cannot open " + file.string());

  RawTable table;
  std::string line;
  std::size_t row = 0;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::vector<std::string_view> tokens;
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto start = rest.find_first_not_of(" \t,");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto end = rest.find_first_of(" \t,");
      tokens.push_back(rest.substr(0, end));
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
    }
    if (tokens.size() < 2) throw ParseError(file, row, "expected a label and at least one value");

    double label = 0;
    if (!parse_number(tokens[0], label) || !std::isfinite(label)) {
      throw ParseError(file, row, "non-numeric label '" + std::string(tokens[0]) + "'");
    }
    std::vector<float> values;
    values.reserve(tokens.size() - 1);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      float v = 0;
      if (!parse_number(tokens[i], v)) {
        throw ParseError(file, row, "non-numeric value '" + std::string(tokens[i]) + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(file, row, "non-finite value at column " + std::to_string(i));
      }
      values.push_back(v);
    }
    if (row == 0) {
      expected = values.size();
    } else if (values.size() != expected) {
      throw ParseError(file, row,
                       "ragged row: " + std::to_string(values.size()) + " values, expected " +
                           std::to_string(expected));
    }
    table.labels.push_back(label);
    table.rows.push_back(std::move(values));
    ++row;
  }
  if (table.rows.empty()) throw DatasetError(file.string() + ": no rows");
  return table;
}

LabeledSeriesSet to_set(const RawTable& table, const LabelMap& map, const std::string& name,
                        Split split) {
  LabeledSeriesSet set;
  set.meta.name = name;
  set.meta.length = table.rows.front().size();
  set.meta.num_classes = map.num_classes();
  set.meta.label_map = map;
  set.instances.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    set.instances.push_back({table.rows[i], map.to_index(table.labels[i])});
  }
  set.meta.split_counts[to_string(split)] = set.instances.size();
  return set;
}

}  // namespace

LabeledSeriesSet load_ucr_split(const fs::path& root, const std::string& name, Split split) {
  const RawTable train = read_table(ucr_split_path(root, name, Split::train));
  auto [mapped, map] = remap_labels(train.labels);
  if (split == Split::train) return to_set(train, map, name, split);

  const RawTable test = read_table(ucr_split_path(root, name, Split::test));
  if (test.rows.front().size() != train.rows.front().size()) {
    throw DatasetError(name + ": TEST length differs from TRAIN length");
  }
  return to_set(test, map, name, split);
}

UcrDataset load_ucr_dataset(const fs::path& root, const std::string& name) {
  UcrDataset ds{load_ucr_split(root, name, Split::train), load_ucr_split(root, name, Split::test)};
  ds.train.meta.split_counts["test"] = ds.test.size();
  ds.test.meta.split_counts["train"] = ds.train.size();
  return ds;
}

void write_ucr_split(const fs::path& file, const LabeledSeriesSet& set) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw DatasetError("cannot write " + file.string());
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (const auto& inst : set.instances) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10)
        << set.meta.label_map.to_raw(inst.label)
        << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (float v : inst.values) out << '\t' << v;
    out << '\n';
  }
  if (!out) throw DatasetError("write failed: " + file.string());
}

HoldoutIndices stratified_holdout_indices(std::span<const int> labels, double fraction,
                                          std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("holdout fraction must lie in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  HoldoutIndices out;
  Rng rng(seed);
  for (auto& [label, members] : by_class) {
    const auto n_held = static_cast<std::size_t>(std::floor(fraction * members.size() + 0.5));
    rng.shuffle(std::span(members));
    out.held.insert(out.held.end(), members.begin(), members.begin() + n_held);
    out.rest.insert(out.rest.end(), members.begin() + n_held, members.end());
  }
  std::sort(out.held.begin(), out.held.end());
  std::sort(out.rest.begin(), out.rest.end());
  return out;
}

LabeledSeriesSet subset(const LabeledSeriesSet& set, std::span<const std::size_t> indices) {
  LabeledSeriesSet out;
  out.meta = set.meta;
  out.instances.reserve(indices.size());
  for (std::size_t i : indices) out.instances.push_back(set.instances.at(i));
  return out;
}

std::pair<LabeledSeriesSet, LabeledSeriesSet> stratified_holdout(const LabeledSeriesSet& set,
                                                                 double fraction,
                                                                 std::uint64_t seed) {
  const auto labels = set.labels();
  const auto idx = stratified_holdout_indices(labels, fraction, seed);
  auto held = subset(set, idx.held);
  auto rest = subset(set, idx.rest);
  held.meta.split_counts = {{"held", held.size()}};
  rest.meta.split_counts = {{"rest", rest.size()}};
  return {std::move(held), std::move(rest)};
}

fs::path resolve_data_root(const std::string& explicit_root) {
  if (!explicit_root.empty()) return explicit_root;
  if (const char* env = std::getenv("VTB_DATA_ROOT"); env != nullptr && *env != '\0') return env;
  throw DatasetError("no data root: pass --data-root or set VTB_DATA_ROOT");
}

}  // namespace vtb
