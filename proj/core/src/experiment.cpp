#include "vtb/experiment.hpp"

#include <atomic>
#include <map>
#include <set>
#include <thread>

#include "vtb/render_cache.hpp"

namespace vtb {

using nlohmann::json;

void SweepConfig::validate() const {
  auto need = [](bool nonempty, const char* axis) {
    if (!nonempty) throw GridError(std::string("sweep axis '") + axis + "' is empty");
  };
  need(!datasets.empty(), "datasets");
  need(!chart_types.empty(), "chart_types");
  need(!color_modes.empty(), "color_modes");
  need(!label_modes.empty(), "label_modes");
  need(!resolutions.empty(), "resolutions");
  need(!architectures.empty(), "architectures");
  need(!fusions.empty(), "fusions");
  need(!numeric_encoders.empty(), "numeric_encoders");
  need(!backbones.empty(), "backbones");
  if (repeats && *repeats < 1) throw GridError("repeats must be >= 1");
  for (auto b : backbones) {
    if (b != nn::EncoderKind::shallow_cnn && b != nn::EncoderKind::deep_cnn) {
      throw GridError(std::string("backbone must be shallow_cnn or deep_cnn, got ") + nn::to_string(b));
    }
  }
  for (auto e : numeric_encoders) {
    if (e == nn::EncoderKind::shallow_cnn || e == nn::EncoderKind::deep_cnn) {
      throw GridError(std::string("numeric encoder cannot be ") + nn::to_string(e));
    }
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw GridError("val_fraction must be in (0,1)");
  train.validate();
}

namespace {

template <typename T, typename F>
json names(const std::vector<T>& v, F f) {
  json a = json::array();
  for (const auto& x : v) a.push_back(f(x));
  return a;
}

template <typename T, typename F>
std::vector<T> parse_list(const json& j, F f) {
  std::vector<T> out;
  for (const auto& x : j) out.push_back(f(x.get<std::string>()));
  return out;
}

}  // namespace

void to_json(json& j, const SweepConfig& s) {
  j["datasets"] = s.datasets;
  j["chart_types"] = names(s.chart_types, [](auto x) { return to_string(x); });
  j["color_modes"] = names(s.color_modes, [](auto x) { return to_string(x); });
  j["label_modes"] = names(s.label_modes, [](auto x) { return to_string(x); });
  j["resolutions"] = s.resolutions;
  j["architectures"] = names(s.architectures, [](auto x) { return std::string(to_string(x)); });
  j["fusions"] = names(s.fusions, [](auto x) { return std::string(nn::to_string(x)); });
  j["numeric_encoders"] = names(s.numeric_encoders, [](auto x) { return std::string(nn::to_string(x)); });
  j["backbones"] = names(s.backbones, [](auto x) { return std::string(nn::to_string(x)); });
  j["repeats"] = s.repeats ? json(*s.repeats) : json("auto");
  j["base_seed"] = s.base_seed;
  j["train"] = s.train;
  j["val_fraction"] = s.val_fraction;
  j["split_seed"] = s.split_seed;
}

void from_json(const json& j, SweepConfig& s) {
  s = SweepConfig{};
  if (j.contains("datasets")) s.datasets = j["datasets"].get<std::vector<std::string>>();
  if (j.contains("chart_types")) s.chart_types = parse_list<ChartType>(j["chart_types"], parse_chart_type);
  if (j.contains("color_modes")) s.color_modes = parse_list<ColorMode>(j["color_modes"], parse_color_mode);
  if (j.contains("label_modes")) s.label_modes = parse_list<LabelMode>(j["label_modes"], parse_label_mode);
  if (j.contains("resolutions")) s.resolutions = j["resolutions"].get<std::vector<int>>();
  if (j.contains("architectures")) s.architectures = parse_list<Architecture>(j["architectures"], parse_architecture);
  if (j.contains("fusions")) s.fusions = parse_list<nn::FusionStrategy>(j["fusions"], nn::parse_fusion);
  if (j.contains("numeric_encoders")) {
    s.numeric_encoders = parse_list<nn::EncoderKind>(j["numeric_encoders"], nn::parse_encoder_kind);
  }
  if (j.contains("backbones")) s.backbones = parse_list<nn::EncoderKind>(j["backbones"], nn::parse_encoder_kind);
  if (j.contains("repeats")) {
    const auto& r = j["repeats"];
    if (r.is_string()) {
      if (r.get<std::string>() != "auto") throw GridError("repeats must be \"auto\" or a positive integer");
      s.repeats.reset();
    } else {
      s.repeats = r.get<int>();
    }
  }
  s.base_seed = j.value("base_seed", s.base_seed);
  if (j.contains("train")) s.train = j["train"].get<TrainConfig>();
  s.val_fraction = j.value("val_fraction", s.val_fraction);
  s.split_seed = j.value("split_seed", s.split_seed);
}

std::vector<RunConfig> expand_grid(const SweepConfig& sweep) {
  sweep.validate();
  std::vector<RunConfig> cells;
  for (const auto& ds : sweep.datasets) {
    for (auto arch : sweep.architectures) {
      for (int res : sweep.resolutions) {
        for (auto backbone : sweep.backbones) {
          RunConfig base;
          base.dataset = ds;
          base.architecture = arch;
          base.resolution = res;
          base.backbone = backbone;
          base.train = sweep.train;
          base.val_fraction = sweep.val_fraction;
          base.split_seed = sweep.split_seed;
          if (arch == Architecture::single_chart) {
            for (auto t : sweep.chart_types) {
              for (auto c : sweep.color_modes) {
                for (auto l : sweep.label_modes) {
                  RunConfig r = base;
                  r.chart_type = t;
                  r.color_mode = c;
                  r.label_mode = l;
                  cells.push_back(r);
                }
              }
            }
            continue;
          }
          const std::vector<nn::EncoderKind> numeric =
              arch == Architecture::multimodal ? sweep.numeric_encoders
                                               : std::vector<nn::EncoderKind>{nn::EncoderKind::fcn};
          for (auto c : sweep.color_modes) {
            for (auto l : sweep.label_modes) {
              for (auto f : sweep.fusions) {
                for (auto ne : numeric) {
                  RunConfig r = base;
                  r.color_mode = c;
                  r.label_mode = l;
                  r.fusion = f;
                  r.numeric_encoder = ne;
                  cells.push_back(r);
                }
              }
            }
          }
        }
      }
    }
  }

  std::vector<RunConfig> runs;
  std::set<std::string> seen;
  for (const auto& cell : cells) {
    const int n = sweep.repeats.value_or(default_repeats(cell.architecture));
    for (int i = 0; i < n; ++i) {
      RunConfig r = cell;
      r.train.seed = sweep.base_seed + static_cast<std::uint64_t>(i);
      if (seen.insert(r.id()).second) runs.push_back(std::move(r));
    }
  }
  return runs;
}

ExecuteReport execute(const std::vector<RunConfig>& runs, const ExecuteOptions& opts) {
  ExecuteReport rep;
  rep.total = runs.size();
  const auto done = completed_run_ids(opts.results_path);
  std::vector<const RunConfig*> todo;
  std::set<std::string> queued;
  for (const auto& r : runs) {
    const std::string id = r.id();
    if (done.count(id) || !queued.insert(id).second) {
      ++rep.skipped;
      continue;
    }
    todo.push_back(&r);
  }

  if (opts.render_first && !todo.empty()) {
    std::map<std::string, std::vector<ChartSpec>> needed;
    for (const auto* r : todo) {
      auto& specs = needed[r->dataset];
      for (const auto& s : r->chart_specs()) {
        if (std::find(specs.begin(), specs.end(), s) == specs.end()) specs.push_back(s);
      }
    }
    for (const auto& [name, specs] : needed) {
      const UcrDataset data = load_ucr_dataset(opts.data_root, name);
      rep.charts_rendered += render_cache(data.train, "train", specs, opts.cache_dir, opts.workers).rendered;
      rep.charts_rendered += render_cache(data.test, "test", specs, opts.cache_dir, opts.workers).rendered;
    }
  }

  RunFn runner = opts.runner;
  if (!runner) {
    RunContext ctx{opts.data_root, opts.cache_dir, std::nullopt};
    runner = [ctx](const RunConfig& c) { return run_single(c, ctx); };
  }

  ResultsWriter writer(opts.results_path);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr write_error;
  auto stopped = [&] { return opts.stop && opts.stop->load(); };
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      if (stopped()) {
        std::lock_guard lock(mu);
        rep.interrupted = true;
        return;
      }
      RunRecord rec;
      try {
        rec = runner(*todo[i]);
      } catch (const std::exception& e) {
        rec.run_id = todo[i]->id();
        rec.config = todo[i]->to_json();
        rec.seed = todo[i]->train.seed;
        rec.status = "failed";
        rec.error = e.what();
      }
      try {
        writer.append(rec);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!write_error) write_error = std::current_exception();
        next = todo.size();
        return;
      }
      std::lock_guard lock(mu);
      ++rep.executed;
      if (!rec.ok()) {
        ++rep.failed;
        rep.failures.emplace_back(rec.run_id, rec.error);
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(todo.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  if (write_error) std::rethrow_exception(write_error);
  return rep;
}

}  // namespace vtb
