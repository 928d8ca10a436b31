#include "vtb/render_cache.hpp"

#include <algorithm>
#include <fstream>
#include <exception>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "vtb/hash.hpp"
#include "vtb/png.hpp"

namespace vtb {

namespace fs = std::filesystem;
using nlohmann::json;

json spec_to_json(const ChartSpec& spec) {
  return json{{"chart_type", to_string(spec.chart_type)},
              {"color_mode", to_string(spec.color_mode)},
              {"label_mode", to_string(spec.label_mode)},
              {"resolution", spec.resolution},
              {"stroke_width", spec.stroke_width},
              {"marker_size", spec.marker_size}};
}

ChartSpec spec_from_json(const json& j) {
  ChartSpec s;
  s.chart_type = parse_chart_type(j.at("chart_type").get<std::string>());
  s.color_mode = parse_color_mode(j.at("color_mode").get<std::string>());
  s.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
  s.resolution = j.at("resolution").get<int>();
  s.stroke_width = j.value("stroke_width", 1);
  s.marker_size = j.value("marker_size", 3);
  return s;
}

std::string chart_cache_path(const std::string& dataset, const std::string& split,
                             std::size_t index, const ChartSpec& spec) {
  return dataset + "/" + split + "/" + std::to_string(index) + "_" + spec.tag() + ".png";
}

fs::path manifest_path(const fs::path& cache_root, const std::string& dataset,
                       const std::string& split) {
  return cache_root / dataset / split / "manifest.jsonl";
}

Manifest read_manifest(const fs::path& file) {
  Manifest m;
  std::ifstream in(file);
  if (!in) return m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A torn last line from an interrupted writer is ignored; its file will be
    // re-rendered on the next pass.
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    m.records.push_back({j.at("path").get<std::string>(), j.at("sha256").get<std::string>(),
                         spec_from_json(j.at("spec")), j.at("instance_index").get<std::size_t>()});
  }
  return m;
}

namespace {

void write_manifest(const fs::path& file, const std::vector<ManifestRecord>& records) {
  std::string text;
  for (const auto& r : records) {
    json j{{"path", r.path},
           {"sha256", r.sha256},
           {"spec", spec_to_json(r.spec)},
           {"instance_index", r.instance_index}};
    text += j.dump();
    text += '\n';
  }
  write_file_atomic(file, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

struct Job {
  std::size_t instance;
  ChartSpec spec;
  std::string rel_path;
};

}  // namespace

Manifest render_cache(const LabeledSeriesSet& set, const std::string& split,
                      std::span<const ChartSpec> specs, const fs::path& cache_root,
                      unsigned workers) {
  for (const auto& s : specs) s.validate();
  const std::string& dataset = set.meta.name;
  const fs::path mpath = manifest_path(cache_root, dataset, split);

  std::map<std::string, ManifestRecord> known;
  for (auto& r : read_manifest(mpath).records) known.emplace(r.path, std::move(r));

  Manifest result;
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (const auto& spec : specs) {
      std::string rel = chart_cache_path(dataset, split, i, spec);
      const auto it = known.find(rel);
      const fs::path file = cache_root / rel;
      if (it != known.end() && it->second.spec == spec && fs::exists(file) &&
          sha256_hex(read_file(file)) == it->second.sha256) {
        ++result.skipped;
        continue;
      }
      jobs.push_back({i, spec, std::move(rel)});
    }
  }

  std::vector<ManifestRecord> fresh(jobs.size());
  std::vector<std::exception_ptr> errors(std::max(1u, workers));
  auto work = [&](unsigned worker, std::size_t begin, std::size_t end) {
    try {
      for (std::size_t j = begin; j < end; ++j) {
        const auto& job = jobs[j];
        const auto png = encode_png(render(set.instances[job.instance].values, job.spec));
        write_file_atomic(cache_root / job.rel_path, png);
        fresh[j] = {job.rel_path, sha256_hex(png), job.spec, job.instance};
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (workers <= 1) {
    work(0, 0, jobs.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (jobs.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(jobs.size(), b + chunk);
      if (b < e) pool.emplace_back(work, w, b, e);
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.rendered = jobs.size();

  for (auto& r : fresh) known.insert_or_assign(r.path, std::move(r));
  result.records.reserve(known.size());
  for (auto& [path, rec] : known) result.records.push_back(std::move(rec));
  if (result.rendered > 0 || !fs::exists(mpath)) write_manifest(mpath, result.records);
  return result;
}

RasterImage load_cached_chart(const fs::path& cache_root, const std::string& dataset,
                              const std::string& split, std::size_t index, const ChartSpec& spec) {
  return decode_png(read_file(cache_root / chart_cache_path(dataset, split, index, spec)));
}

}  // namespace vtb
