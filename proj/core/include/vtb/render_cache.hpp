#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vtb/chart.hpp"
#include "vtb/dataset.hpp"

namespace vtb {

struct ManifestRecord {
  std::string path;  // relative to the cache root
  std::string sha256;
  ChartSpec spec;
  std::size_t instance_index = 0;
};

struct Manifest {
  std::vector<ManifestRecord> records;  // sorted by path
  std::size_t rendered = 0;
  std::size_t skipped = 0;
};

nlohmann::json spec_to_json(const ChartSpec& spec);
ChartSpec spec_from_json(const nlohmann::json& j);

// "{dataset}/{split}/{index}_{type}_{color}_{label}_{res}.png"
std::string chart_cache_path(const std::string& dataset, const std::string& split,
                             std::size_t index, const ChartSpec& spec);
std::filesystem::path manifest_path(const std::filesystem::path& cache_root,
                                    const std::string& dataset, const std::string& split);

Manifest read_manifest(const std::filesystem::path& file);

// Renders one PNG per (instance, spec) under `cache_root`. Files whose bytes
// still hash to the manifest entry are skipped; missing or altered files are
// re-rendered. Records for other specs already in the manifest are kept.
Manifest render_cache(const LabeledSeriesSet& set, const std::string& split,
                      std::span<const ChartSpec> specs, const std::filesystem::path& cache_root,
                      unsigned workers = 1);

RasterImage load_cached_chart(const std::filesystem::path& cache_root, const std::string& dataset,
                              const std::string& split, std::size_t index, const ChartSpec& spec);

}  // namespace vtb
