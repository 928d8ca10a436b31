#include "vtb/config.hpp"

#include <fstream>
#include <set>

namespace vtb {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
  require_object(j, path);
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(join(path, k), "unknown key");
  }
}

template <typename T>
void read(const json& j, const std::string& key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(join(path, key), "expected a boolean");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
      if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(join(path, key), "must be >= 0");
        }
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(join(path, key), e.what());
  }
}

template <typename E, typename F>
void read_enum(const json& j, const std::string& key, const std::string& path, E& out, F parse) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  try {
    out = parse(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join(path, key), e.what());
  }
}

template <typename E, typename F>
void read_enum_list(const json& j, const std::string& key, const std::string& path, std::vector<E>& out, F parse) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError(join(path, key), "expected an array");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = join(path, key) + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) throw ConfigError(p, "expected a string");
    try {
      out.push_back(parse(v[i].get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p, e.what());
    }
  }
}

TrainConfig parse_train(const json& j, const std::string& path) {
  check_keys(j, {"lr", "weight_decay", "decoupled_weight_decay", "patience", "plateau_patience", "plateau_factor",
                 "min_lr", "max_epochs", "batch_size", "seed"},
             path);
  TrainConfig c;
  read(j, "lr", path, c.lr);
  read(j, "weight_decay", path, c.weight_decay);
  read(j, "decoupled_weight_decay", path, c.decoupled_weight_decay);
  read(j, "patience", path, c.patience);
  read(j, "plateau_patience", path, c.plateau_patience);
  read(j, "plateau_factor", path, c.plateau_factor);
  read(j, "min_lr", path, c.min_lr);
  read(j, "max_epochs", path, c.max_epochs);
  read(j, "batch_size", path, c.batch_size);
  read(j, "seed", path, c.seed);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

SweepConfig parse_sweep(const json& j, const std::string& path) {
  check_keys(j, {"datasets", "chart_types", "color_modes", "label_modes", "resolutions", "architectures", "fusions",
                 "numeric_encoders", "backbones", "repeats", "base_seed"},
             path);
  SweepConfig s;
  if (j.contains("datasets")) {
    const auto& v = j["datasets"];
    if (!v.is_array()) throw ConfigError(join(path, "datasets"), "expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError(join(path, "datasets") + "[" + std::to_string(i) + "]", "expected a string");
      s.datasets.push_back(v[i].get<std::string>());
    }
  }
  read_enum_list(j, "chart_types", path, s.chart_types, parse_chart_type);
  read_enum_list(j, "color_modes", path, s.color_modes, parse_color_mode);
  read_enum_list(j, "label_modes", path, s.label_modes, parse_label_mode);
  read_enum_list(j, "architectures", path, s.architectures, parse_architecture);
  read_enum_list(j, "fusions", path, s.fusions, nn::parse_fusion);
  read_enum_list(j, "numeric_encoders", path, s.numeric_encoders, nn::parse_encoder_kind);
  read_enum_list(j, "backbones", path, s.backbones, nn::parse_encoder_kind);
  if (j.contains("resolutions")) {
    const auto& v = j["resolutions"];
    if (!v.is_array()) throw ConfigError(join(path, "resolutions"), "expected an array");
    s.resolutions.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = join(path, "resolutions") + "[" + std::to_string(i) + "]";
      if (!v[i].is_number_integer() || v[i].get<int>() < 16) throw ConfigError(p, "expected an integer >= 16");
      s.resolutions.push_back(v[i].get<int>());
    }
  }
  if (j.contains("repeats")) {
    const auto& r = j["repeats"];
    if (r.is_string() && r.get<std::string>() == "auto") {
      s.repeats.reset();
    } else if (r.is_number_integer() && r.get<int>() >= 1) {
      s.repeats = r.get<int>();
    } else {
      throw ConfigError(join(path, "repeats"), "expected \"auto\" or a positive integer");
    }
  }
  read(j, "base_seed", path, s.base_seed);
  return s;
}

RunSpec parse_run(const json& j, const std::string& path) {
  check_keys(j, {"dataset", "architecture", "chart_type", "color_mode", "label_mode", "resolution", "backbone",
                 "numeric_encoder", "fusion", "seed"},
             path);
  RunSpec r;
  read(j, "dataset", path, r.dataset);
  if (r.dataset.empty()) throw ConfigError(join(path, "dataset"), "required");
  read_enum(j, "architecture", path, r.architecture, parse_architecture);
  read_enum(j, "chart_type", path, r.chart_type, parse_chart_type);
  read_enum(j, "color_mode", path, r.color_mode, parse_color_mode);
  read_enum(j, "label_mode", path, r.label_mode, parse_label_mode);
  read(j, "resolution", path, r.resolution);
  read_enum(j, "backbone", path, r.backbone, nn::parse_encoder_kind);
  read_enum(j, "numeric_encoder", path, r.numeric_encoder, nn::parse_encoder_kind);
  read_enum(j, "fusion", path, r.fusion, nn::parse_fusion);
  read(j, "seed", path, r.seed);
  return r;
}

}  // namespace

RunConfig AppConfig::run_config() const {
  if (!run) throw ConfigError("run", "no run cell configured");
  RunConfig c;
  c.dataset = run->dataset;
  c.architecture = run->architecture;
  c.chart_type = run->chart_type;
  c.color_mode = run->color_mode;
  c.label_mode = run->label_mode;
  c.resolution = run->resolution;
  c.backbone = run->backbone;
  c.numeric_encoder = run->numeric_encoder;
  c.fusion = run->fusion;
  c.train = train;
  c.train.seed = run->seed;
  c.val_fraction = val_fraction;
  c.split_seed = split_seed;
  return c;
}

SweepConfig AppConfig::sweep_config() const {
  SweepConfig s = sweep;
  s.train = train;
  s.val_fraction = val_fraction;
  s.split_seed = split_seed;
  return s;
}

AppConfig parse_app_config(const json& j) {
  check_keys(j, {"data_root", "cache_dir", "results_path", "checkpoint_dir", "workers", "theta", "val_fraction",
                 "split_seed", "train", "sweep", "run"},
             "");
  AppConfig c;
  read(j, "data_root", "", c.data_root);
  read(j, "cache_dir", "", c.cache_dir);
  read(j, "results_path", "", c.results_path);
  read(j, "checkpoint_dir", "", c.checkpoint_dir);
  read(j, "workers", "", c.workers);
  if (c.workers < 1) throw ConfigError("workers", "must be >= 1");
  read(j, "theta", "", c.theta);
  if (c.theta < 0) throw ConfigError("theta", "must be >= 0");
  read(j, "val_fraction", "", c.val_fraction);
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) throw ConfigError("val_fraction", "must be in (0,1)");
  read(j, "split_seed", "", c.split_seed);
  if (j.contains("train")) c.train = parse_train(j["train"], "train");
  if (j.contains("sweep")) c.sweep = parse_sweep(j["sweep"], "sweep");
  if (j.contains("run")) c.run = parse_run(j["run"], "run");
  return c;
}

AppConfig load_app_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open config file " + file.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", file.string() + ": " + e.what());
  }
  return parse_app_config(j);
}

json app_config_to_json(const AppConfig& c) {
  json j;
  j["data_root"] = c.data_root;
  j["cache_dir"] = c.cache_dir;
  j["results_path"] = c.results_path;
  j["checkpoint_dir"] = c.checkpoint_dir;
  j["workers"] = c.workers;
  j["theta"] = c.theta;
  j["val_fraction"] = c.val_fraction;
  j["split_seed"] = c.split_seed;
  j["train"] = c.train;
  json s = c.sweep;
  for (const char* k : {"train", "val_fraction", "split_seed"}) s.erase(k);
  j["sweep"] = s;
  if (c.run) {
    const RunConfig rc = c.run_config();
    json r = rc.to_json();
    for (const char* k : {"train", "val_fraction", "split_seed"}) r.erase(k);
    r["seed"] = c.run->seed;
    j["run"] = r;
  }
  return j;
}

}  // namespace vtb
