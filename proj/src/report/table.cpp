#include "tabcl/report/table.hpp"

#include "tabcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace tabcl {

bool closer_to_joint(Scalar cell, Scalar none, Scalar joint) {
  return std::abs(cell - joint) < std::abs(cell - none);
}

const std::vector<std::pair<std::string, std::string>>& method_order() {
  static const std::vector<std::pair<std::string, std::string>> order = {
      {"Baselines", "none"},
      {"Baselines", "joint"},
      {"Regularization", "ewc"},
      {"Regularization", "ewc_online"},
      {"Regularization", "si"},
      {"Replay", "lwf"},
      {"Replay", "gr"},
      {"Replay", "gr_distill"},
      {"Replay", "rtf"},
      {"Replay", "bir"},
      {"Replay + Exemplars", "er"},
      {"Replay + Exemplars", "agem"},
      {"Replay + Exemplars", "icarl"},
  };
  return order;
}

std::string family_of(const std::string& strategy_label) {
  for (const auto& [family, name] : method_order())
    if (name == strategy_label) return family;
  if (strategy_label.rfind("pjr", 0) == 0) return "Partial Joint Replay";
  return "Other";
}

ReportTable build_report(const std::vector<RunResult>& runs) {
  if (runs.empty()) throw ConfigError("report: no persisted runs");

  // Group by (scenario, strategy label), aggregating across seeds.
  std::map<std::string, std::map<std::string, std::vector<RunResult>>> grouped;
  std::set<std::string> scenario_set;
  for (const auto& r : runs) {
    grouped[r.scenario][r.strategy].push_back(r);
    scenario_set.insert(r.scenario);
  }

  ReportTable table;
  for (const std::string name : {"task_il", "class_il", "domain_il"})
    if (scenario_set.count(name)) table.scenarios.push_back(name);

  // Row order: the fixed method order, then pjr fractions ascending.
  std::vector<std::string> labels;
  for (const auto& [family, name] : method_order()) {
    bool present = false;
    for (const auto& [scenario, by_label] : grouped)
      if (by_label.count(name)) present = true;
    if (present) labels.push_back(name);
  }
  std::vector<std::pair<Scalar, std::string>> pjr_labels;
  for (const auto& [scenario, by_label] : grouped)
    for (const auto& [label, rs] : by_label)
      if (label.rfind("pjr", 0) == 0) {
        const Scalar f = std::stod(label.substr(4));
        if (std::find_if(pjr_labels.begin(), pjr_labels.end(), [&](const auto& p) {
              return p.second == label;
            }) == pjr_labels.end())
          pjr_labels.emplace_back(f, label);
      }
  std::sort(pjr_labels.begin(), pjr_labels.end());
  for (const auto& [f, label] : pjr_labels) labels.push_back(label);

  for (const std::string& label : labels) {
    ReportRow row;
    row.family = family_of(label);
    row.strategy = label;
    for (const std::string& scenario : table.scenarios) {
      auto sit = grouped.find(scenario);
      if (sit == grouped.end()) continue;
      auto lit = sit->second.find(label);
      if (lit == sit->second.end()) continue;
      ReportCell cell;
      cell.present = true;
      cell.agg = aggregate_seeds(lit->second);
      row.by_scenario[scenario] = cell;
    }
    table.rows.push_back(std::move(row));
  }

  // Closer-to-Joint flags need both baselines per scenario.
  for (const std::string& scenario : table.scenarios) {
    const auto& by_label = grouped.at(scenario);
    const bool have_baselines = by_label.count("none") && by_label.count("joint");
    if (!have_baselines) {
      table.missing_baselines = true;
      continue;
    }
    const Scalar none = aggregate_seeds(by_label.at("none")).mean_of_mean;
    const Scalar joint = aggregate_seeds(by_label.at("joint")).mean_of_mean;
    for (auto& row : table.rows) {
      auto it = row.by_scenario.find(scenario);
      if (it == row.by_scenario.end() || !it->second.present) continue;
      it->second.flag_valid = true;
      it->second.flagged = closer_to_joint(it->second.agg.mean_of_mean, none, joint);
    }
  }
  return table;
}

namespace {

std::string format_value(Scalar value, Scalar stdev, bool with_std, bool flagged) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << value * 100.0;
  if (with_std) out << "+-" << std::setprecision(1) << stdev * 100.0;
  if (flagged) out << "*";
  return out.str();
}

} // namespace

std::string ReportTable::render_text() const {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"Approach", "Method"};
  for (const auto& scenario : scenarios) {
    header.push_back(scenario + " Mean");
    header.push_back(scenario + " Min");
  }
  grid.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line = {row.family, row.strategy};
    for (const auto& scenario : scenarios) {
      auto it = row.by_scenario.find(scenario);
      if (it == row.by_scenario.end() || !it->second.present) {
        line.push_back("-");
        line.push_back("-");
        continue;
      }
      const auto& cell = it->second;
      line.push_back(format_value(cell.agg.mean_of_mean, cell.agg.std_of_mean,
                                  cell.agg.report_std_mean,
                                  cell.flag_valid && cell.flagged));
      line.push_back(format_value(cell.agg.mean_of_min, cell.agg.std_of_min,
                                  cell.agg.report_std_min, false));
    }
    grid.push_back(std::move(line));
  }

  std::vector<std::size_t> widths(grid.front().size(), 0);
  for (const auto& line : grid)
    for (std::size_t c = 0; c < line.size(); ++c)
      widths[c] = std::max(widths[c], line[c].size());
  std::ostringstream out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t c = 0; c < grid[r].size(); ++c) {
      out << std::left << std::setw(static_cast<int>(widths[c]) + 2) << grid[r][c];
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (const auto w : widths) total += w + 2;
      out << std::string(total, '-') << "\n";
    }
  }
  out << "\n* closer to Joint than to None (mean accuracy)\n";
  if (missing_baselines)
    out << "warning: None/Joint baselines missing in at least one scenario; "
           "flags disabled there\n";
  return out.str();
}

std::string ReportTable::render_csv() const {
  std::ostringstream out;
  out << "scenario,family,method,n_seeds,mean,std_mean,min,std_min,closer_to_joint\n";
  out << std::setprecision(17);
  for (const auto& row : rows)
    for (const auto& scenario : scenarios) {
      auto it = row.by_scenario.find(scenario);
      if (it == row.by_scenario.end() || !it->second.present) continue;
      const auto& cell = it->second;
      out << scenario << "," << row.family << "," << row.strategy << ","
          << cell.agg.n_seeds << "," << cell.agg.mean_of_mean << ","
          << (cell.agg.report_std_mean ? std::to_string(cell.agg.std_of_mean) : "")
          << "," << cell.agg.mean_of_min << ","
          << (cell.agg.report_std_min ? std::to_string(cell.agg.std_of_min) : "") << ","
          << (cell.flag_valid ? (cell.flagged ? "1" : "0") : "") << "\n";
    }
  return out.str();
}

} // namespace tabcl
