#include <doctest.h>

#include "vtb/report.hpp"

using namespace vtb;

namespace {

RunRecord record(const std::string& ds, Architecture arch, double acc, std::uint64_t seed = 0,
                 ChartType type = ChartType::line) {
  RunConfig c;
  c.dataset = ds;
  c.architecture = arch;
  c.chart_type = type;
  c.train.seed = seed;
  RunRecord r;
  r.run_id = c.id();
  r.config = c.to_json();
  r.test.accuracy = acc;
  r.num_classes = 2;
  r.seed = seed;
  return r;
}

}  // namespace

TEST_CASE("delta groups at the threshold") {
  CHECK(delta_group(0.05) == "Improving");
  CHECK(delta_group(0.03) == "Almost Same");
  CHECK(delta_group(-0.03) == "Almost Same");
  CHECK(delta_group(-0.031) == "Degrading");
  CHECK(delta_group(0.02, 0.01) == "Improving");
}

TEST_CASE("delta table over a small fixture") {
  std::vector<RunRecord> recs{
      record("A", Architecture::single_chart, 0.70, 0, ChartType::line),
      record("A", Architecture::single_chart, 0.80, 1, ChartType::line),  // mean 0.75
      record("A", Architecture::single_chart, 0.60, 0, ChartType::bar),
      record("A", Architecture::multimodal, 0.85),
      record("B", Architecture::single_chart, 0.90),
      record("B", Architecture::multimodal, 0.91),
      record("C", Architecture::single_chart, 0.90),
      record("C", Architecture::multimodal, 0.80),
      record("D", Architecture::single_chart, 0.50),
  };
  auto failed = record("B", Architecture::multimodal, 0.0, 5);
  failed.status = "failed";
  recs.push_back(failed);

  const auto rows = report_delta_table(recs);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].best_single == doctest::Approx(0.75));
  CHECK(*rows[0].delta == doctest::Approx(0.10));
  CHECK(rows[0].group == "Improving");
  CHECK(rows[1].group == "Almost Same");
  CHECK(*rows[1].multimodal == doctest::Approx(0.91));
  CHECK(rows[2].group == "Degrading");
  CHECK(rows[3].group == "incomplete");
  CHECK_FALSE(rows[3].complete);
  const auto t = delta_table(rows);
  CHECK(t.rows.size() == 4);
  CHECK(t.rows[0][5] == "+0.100");
  CHECK(t.to_csv().find("dataset,best_single") == 0);
}

TEST_CASE("summaries skip failed runs") {
  auto bad = record("A", Architecture::single_chart, 0.0, 1);
  bad.status = "failed";
  const auto cells = summarize_cells({record("A", Architecture::single_chart, 0.6), bad});
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].runs == 1);
  CHECK(cells[0].mean_accuracy == doctest::Approx(0.6));
}

TEST_CASE("matrix csv parse with missing cells") {
  const auto m = parse_matrix_csv("dataset,x,y\nd1,0.5,0.7\nd2,,0.1\n\nd3,0.2\n");
  CHECK(m.methods == std::vector<std::string>{"x", "y"});
  CHECK(m.datasets == std::vector<std::string>{"d1", "d2", "d3"});
  CHECK_FALSE(m.acc[1][0].has_value());
  CHECK_FALSE(m.acc[2][1].has_value());
  CHECK(*m.acc[0][1] == doctest::Approx(0.7));
  CHECK_THROWS(parse_matrix_csv("dataset,x\nd1,0.1,0.2\n"));
  CHECK_THROWS(parse_matrix_csv("dataset,x\nd1,abc\n"));
}

TEST_CASE("rank and pairwise tables") {
  const auto m = parse_matrix_csv("dataset,x,y\nd1,0.5,0.7\nd2,0.3,0.1\nd3,0.9,0.9\nd4,,0.2\n");
  const auto r = rank_table(m);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0][0] == "x");
  CHECK(r.rows[2][1] == "d4");
  const auto p = pairwise_stats_table(m);
  REQUIRE(p.rows.size() == 1);
  CHECK(p.to_markdown().find('|') != std::string::npos);
}

TEST_CASE("setting matrix aggregates per chart type") {
  std::vector<RunRecord> recs;
  for (const char* ds : {"A", "B"}) {
    for (ChartType t : kAllChartTypes) recs.push_back(record(ds, Architecture::single_chart, 0.5, 0, t));
  }
  const auto rep = report_setting_matrix(recs);
  CHECK(rep.matrices.size() == 4);
  REQUIRE_FALSE(rep.aggregate.empty());
  CHECK(rep.aggregate[0].datasets == 2);
  CHECK(rep.aggregate[0].mean == doctest::Approx(0.5));
  CHECK(*rep.aggregate[0].half_width == doctest::Approx(0.0));
}
