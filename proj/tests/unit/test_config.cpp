#include <doctest.h>

#include "vtb/config.hpp"

using namespace vtb;
using nlohmann::json;

namespace {

std::string error_path(const json& j) {
  try {
    parse_app_config(j);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("defaults") {
  const auto c = parse_app_config(json::object());
  CHECK(c.workers == 1);
  CHECK(c.theta == doctest::Approx(0.03));
  CHECK(c.val_fraction == doctest::Approx(0.2));
  CHECK(c.train.patience == 10);
  CHECK_FALSE(c.run.has_value());
}

TEST_CASE("full sweep config") {
  const auto j = json::parse(R"({
    "train": {"max_epochs": 5, "lr": 0.01},
    "sweep": {"datasets": ["A", "B"], "resolutions": [64, 128], "repeats": 2,
              "chart_types": ["line", "bar"], "architectures": ["single_chart"]}
  })");
  const auto c = parse_app_config(j);
  const auto s = c.sweep_config();
  CHECK(s.train.max_epochs == 5);
  CHECK(s.datasets.size() == 2);
  CHECK(expand_grid(s).size() == 2 * 2 * 2 * 2 * 2 * 2);
  const auto back = parse_app_config(app_config_to_json(c));
  CHECK(back.sweep_config().datasets == s.datasets);
}

TEST_CASE("run cell") {
  const auto c = parse_app_config(json::parse(
      R"({"run": {"dataset": "GunPoint", "chart_type": "scatter", "resolution": 64, "seed": 4}})"));
  const auto rc = c.run_config();
  CHECK(rc.chart_type == ChartType::scatter);
  CHECK(rc.resolution == 64);
  CHECK(rc.train.seed == 4);
  CHECK_THROWS_AS(parse_app_config(json::object()).run_config(), ConfigError);
}

TEST_CASE("errors carry the key path") {
  CHECK(error_path(json::parse(R"({"sweep": {"foo": 1}})")) == "sweep.foo");
  CHECK(error_path(json::parse(R"({"bogus": true})")) == "bogus");
  CHECK(error_path(json::parse(R"({"sweep": {"resolutions": [64, 8]}})")) == "sweep.resolutions[1]");
  CHECK(error_path(json::parse(R"({"train": {"lr": "fast"}})")) == "train.lr");
  CHECK(error_path(json::parse(R"({"sweep": {"chart_types": ["pie"]}})")) == "sweep.chart_types[0]");
  CHECK(error_path(json::parse(R"({"workers": 0})")) == "workers");
  CHECK(error_path(json::parse(R"({"run": {"chart_type": "line"}})")) == "run.dataset");
  CHECK(error_path(json::parse(R"({"sweep": {"repeats": 0}})")) == "sweep.repeats");
}
