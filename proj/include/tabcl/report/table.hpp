#ifndef TABCL_REPORT_TABLE_HPP
#define TABCL_REPORT_TABLE_HPP

#include "tabcl/harness/run.hpp"

#include <map>
#include <string>
#include <vector>

namespace tabcl {

// A cell is flagged when it sits strictly closer to the Joint baseline than
// to the None baseline (ties are not flagged).
bool closer_to_joint(Scalar cell, Scalar none, Scalar joint);

struct ReportCell {
  bool present = false;
  AggregateResult agg;
  bool flagged = false;
  bool flag_valid = false; // both baselines present in this scenario
};

struct ReportRow {
  std::string family;
  std::string strategy;
  std::map<std::string, ReportCell> by_scenario;
};

struct ReportTable {
  std::vector<std::string> scenarios; // column order
  std::vector<ReportRow> rows;        // method order mirrors the summary-table layout
  bool missing_baselines = false;

  std::string render_text() const;
  std::string render_csv() const;
};

ReportTable build_report(const std::vector<RunResult>& runs);

// Fixed method order for tables and plot legends.
const std::vector<std::pair<std::string, std::string>>& method_order();
std::string family_of(const std::string& strategy_label);

} // namespace tabcl

#endif
