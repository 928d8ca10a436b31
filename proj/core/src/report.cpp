#include "vtb/report.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vtb {

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt_fixed(const std::optional<double>& v, int digits = 3) {
  return v ? format_fixed(*v, digits) : "";
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_escape(cells[i]);
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string Table::to_markdown() const {
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  auto line = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) out += " " + c + " |";
    out += '\n';
  };
  line(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
  out += '\n';
  for (const auto& r : rows) line(r);
  return out;
}

std::vector<CellSummary> summarize_cells(const std::vector<RunRecord>& records) {
  std::map<std::string, CellSummary> cells;
  std::vector<std::string> order;
  std::set<std::string> seen_runs;
  for (const auto& r : records) {
    if (!r.ok() || !seen_runs.insert(r.run_id).second) continue;
    const RunConfig cfg = RunConfig::from_json(r.config);
    const std::string key = cfg.cell_key();
    auto [it, fresh] = cells.try_emplace(key);
    if (fresh) {
      it->second.config = cfg;
      it->second.num_classes = r.num_classes;
      order.push_back(key);
    }
    it->second.mean_accuracy += r.test.accuracy;
    ++it->second.runs;
  }
  std::vector<CellSummary> out;
  for (const auto& k : order) {
    auto c = cells[k];
    c.mean_accuracy /= static_cast<double>(c.runs);
    out.push_back(std::move(c));
  }
  return out;
}

std::string method_label(const RunConfig& cfg) {
  std::string s = to_string(cfg.architecture);
  s += "/";
  if (cfg.architecture == Architecture::single_chart) s += to_string(cfg.chart_type) + "_";
  s += to_string(cfg.color_mode) + "_" + to_string(cfg.label_mode) + "_" + std::to_string(cfg.resolution);
  s += "/";
  s += nn::to_string(cfg.backbone);
  if (cfg.architecture != Architecture::single_chart) s += std::string("/") + nn::to_string(cfg.fusion);
  if (cfg.architecture == Architecture::multimodal) s += std::string("/") + nn::to_string(cfg.numeric_encoder);
  return s;
}

std::string delta_group(double delta, double theta) {
  if (delta > theta) return "Improving";
  if (delta < -theta) return "Degrading";
  return "Almost Same";
}

std::vector<DeltaRow> report_delta_table(const std::vector<RunRecord>& records, double theta) {
  std::map<std::string, DeltaRow> rows;
  std::vector<std::string> order;
  for (const auto& c : summarize_cells(records)) {
    const std::string& ds = c.config.dataset;
    auto [it, fresh] = rows.try_emplace(ds);
    if (fresh) {
      it->second.dataset = ds;
      order.push_back(ds);
    }
    DeltaRow& row = it->second;
    if (c.config.architecture == Architecture::single_chart) {
      if (!row.best_single || c.mean_accuracy > *row.best_single) {
        row.best_single = c.mean_accuracy;
        row.best_single_setting = method_label(c.config);
      }
    } else if (c.config.architecture == Architecture::multimodal) {
      if (!row.multimodal || c.mean_accuracy > *row.multimodal) {
        row.multimodal = c.mean_accuracy;
        row.multimodal_setting = method_label(c.config);
      }
    }
  }
  std::vector<DeltaRow> out;
  for (const auto& ds : order) {
    DeltaRow r = rows[ds];
    r.complete = r.best_single && r.multimodal;
    if (r.complete) {
      r.delta = *r.multimodal - *r.best_single;
      r.group = delta_group(*r.delta, theta);
    } else {
      r.group = "incomplete";
    }
    out.push_back(std::move(r));
  }
  return out;
}

Table delta_table(const std::vector<DeltaRow>& rows) {
  Table t;
  t.title = "Multimodal vs best single chart";
  t.header = {"dataset", "best_single", "best_single_setting", "multimodal", "multimodal_setting", "delta", "group"};
  for (const auto& r : rows) {
    t.rows.push_back({r.dataset, opt_fixed(r.best_single), r.best_single_setting, opt_fixed(r.multimodal),
                      r.multimodal_setting, r.delta ? (*r.delta >= 0 ? "+" : "") + format_fixed(*r.delta) : "",
                      r.group});
  }
  return t;
}

SettingReport report_setting_matrix(const std::vector<RunRecord>& records) {
  struct Key {
    ChartType type;
    int res;
    std::string backbone;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, SettingMatrix> mats;
  std::map<std::string, int> classes;
  for (const auto& c : summarize_cells(records)) {
    if (c.config.architecture != Architecture::single_chart) continue;
    const Key k{c.config.chart_type, c.config.resolution, nn::to_string(c.config.backbone)};
    auto& m = mats[k];
    m.chart_type = k.type;
    m.resolution = k.res;
    m.backbone = k.backbone;
    auto it = std::find(m.datasets.begin(), m.datasets.end(), c.config.dataset);
    std::size_t row = static_cast<std::size_t>(it - m.datasets.begin());
    if (it == m.datasets.end()) {
      m.datasets.push_back(c.config.dataset);
      m.accuracy.emplace_back();
    }
    const auto variants = setting_variants(c.config.chart_type, c.config.resolution);
    for (std::size_t s = 0; s < variants.size(); ++s) {
      if (variants[s].color_mode == c.config.color_mode && variants[s].label_mode == c.config.label_mode) {
        m.accuracy[row][s] = c.mean_accuracy;
      }
    }
    classes[c.config.dataset] = c.num_classes;
  }

  SettingReport rep;
  std::map<std::pair<ChartType, std::string>, std::map<std::string, std::pair<double, int>>> per_dataset;
  for (auto& [k, m] : mats) {
    for (std::size_t d = 0; d < m.datasets.size(); ++d) {
      const std::string task = classes[m.datasets[d]] == 2 ? "binary" : "multiclass";
      auto& acc = per_dataset[{m.chart_type, task}][m.datasets[d]];
      for (const auto& v : m.accuracy[d]) {
        if (v) {
          acc.first += *v;
          ++acc.second;
        }
      }
    }
    rep.matrices.push_back(std::move(m));
  }
  std::map<std::pair<ChartType, std::string>, std::vector<double>> groups;
  for (const auto& [k, by_ds] : per_dataset) {
    for (const auto& [ds, acc] : by_ds) {
      if (acc.second > 0) groups[k].push_back(acc.first / acc.second);
    }
  }
  for (const auto& [k, vals] : groups) {
    AggregateRow a;
    a.chart_type = k.first;
    a.task = k.second;
    a.datasets = vals.size();
    if (vals.size() >= 2) {
      const auto ci = stats::mean_ci95(vals);
      a.mean = ci.mean;
      a.half_width = ci.half_width;
    } else {
      a.mean = vals.front();
    }
    rep.aggregate.push_back(a);
  }
  return rep;
}

std::vector<Table> setting_tables(const SettingReport& rep) {
  std::vector<Table> out;
  for (const auto& m : rep.matrices) {
    Table t;
    t.title = to_string(m.chart_type) + " @" + std::to_string(m.resolution) + " (" + m.backbone + ")";
    t.header = {"dataset", "mono+label", "mono+no_label", "color+label", "color+no_label"};
    for (std::size_t d = 0; d < m.datasets.size(); ++d) {
      std::vector<std::string> row{m.datasets[d]};
      for (const auto& v : m.accuracy[d]) row.push_back(opt_fixed(v));
      t.rows.push_back(std::move(row));
    }
    out.push_back(std::move(t));
  }
  Table agg;
  agg.title = "Aggregate accuracy (%) by chart type, mean +- 95% CI across datasets";
  agg.header = {"chart_type", "task", "datasets", "mean", "ci95"};
  for (const auto& a : rep.aggregate) {
    agg.rows.push_back({to_string(a.chart_type), a.task, std::to_string(a.datasets), format_fixed(100.0 * a.mean, 1),
                        a.half_width ? format_fixed(100.0 * *a.half_width, 1) : "n/a"});
  }
  out.push_back(std::move(agg));
  return out;
}

AccuracyMatrix matrix_from_results(const std::vector<RunRecord>& records) {
  AccuracyMatrix m;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& c : summarize_cells(records)) {
    const std::string method = method_label(c.config);
    if (std::find(m.datasets.begin(), m.datasets.end(), c.config.dataset) == m.datasets.end()) {
      m.datasets.push_back(c.config.dataset);
    }
    if (std::find(m.methods.begin(), m.methods.end(), method) == m.methods.end()) m.methods.push_back(method);
    cell[{c.config.dataset, method}] = c.mean_accuracy;
  }
  for (const auto& d : m.datasets) {
    std::vector<std::optional<double>> row;
    for (const auto& meth : m.methods) {
      auto it = cell.find({d, meth});
      row.push_back(it == cell.end() ? std::nullopt : std::optional<double>(it->second));
    }
    m.acc.push_back(std::move(row));
  }
  return m;
}

AccuracyMatrix parse_matrix_csv(const std::string& text) {
  AccuracyMatrix m;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cur;
    std::istringstream ls(l);
    while (std::getline(ls, cur, ',')) cells.push_back(trim(cur));
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (m.methods.empty()) {
      if (cells.size() < 2) throw std::invalid_argument("matrix CSV header needs a dataset column and a method");
      m.methods.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (cells.size() > m.methods.size() + 1) {
      throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) + ": too many cells");
    }
    m.datasets.push_back(cells[0]);
    std::vector<std::optional<double>> row(m.methods.size());
    for (std::size_t k = 1; k < cells.size(); ++k) {
      if (cells[k].empty()) continue;
      double v = 0.0;
      const auto* b = cells[k].data();
      const auto [p, ec] = std::from_chars(b, b + cells[k].size(), v);
      if (ec != std::errc() || p != b + cells[k].size()) {
        throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) + ": bad number '" + cells[k] + "'");
      }
      row[k - 1] = v;
    }
    m.acc.push_back(std::move(row));
  }
  if (m.methods.empty()) throw std::invalid_argument("matrix CSV is empty");
  return m;
}

AccuracyMatrix read_matrix_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_matrix_csv(ss.str());
}

Table rank_table(const AccuracyMatrix& m) {
  const auto r = stats::avg_rank_table(m.datasets, m.methods, m.acc);
  Table t;
  t.title = "Average rank (1st-place wins)";
  t.header = {"method", "average_rank", "wins"};
  for (const auto& row : r.rows) {
    t.rows.push_back({row.method, format_fixed(row.average_rank, 2), format_fixed(row.wins, 0)});
  }
  if (!r.excluded_datasets.empty()) {
    std::string ex;
    for (const auto& d : r.excluded_datasets) ex += (ex.empty() ? "" : " ") + d;
    t.rows.push_back({"excluded (missing cells)", ex, ""});
  }
  return t;
}

Table pairwise_stats_table(const AccuracyMatrix& m, const stats::WilcoxonOptions& opts) {
  Table t;
  t.title = "Pairwise Wilcoxon signed-rank and Cliff's delta";
  t.header = {"method_a", "method_b", "n", "mean_a", "mean_b", "W", "p_value", "cliffs_delta", "magnitude"};
  for (std::size_t a = 0; a < m.methods.size(); ++a) {
    for (std::size_t b = a + 1; b < m.methods.size(); ++b) {
      std::vector<double> xa, xb;
      for (std::size_t d = 0; d < m.datasets.size(); ++d) {
        if (m.acc[d][a] && m.acc[d][b]) {
          xa.push_back(*m.acc[d][a]);
          xb.push_back(*m.acc[d][b]);
        }
      }
      if (xa.empty()) continue;
      const auto w = stats::wilcoxon_signed_rank(xa, xb, opts);
      const auto cd = stats::cliffs_delta(xa, xb);
      double ma = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < xa.size(); ++i) {
        ma += xa[i];
        mb += xb[i];
      }
      const auto n = static_cast<double>(xa.size());
      t.rows.push_back({m.methods[a], m.methods[b], std::to_string(xa.size()), format_fixed(ma / n, 4),
                        format_fixed(mb / n, 4), format_fixed(w.statistic, 1), format_fixed(w.p_value, 4),
                        format_fixed(cd.delta, 4), stats::to_string(cd.magnitude)});
    }
  }
  return t;
}

}  // namespace vtb
