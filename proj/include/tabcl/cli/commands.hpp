#ifndef TABCL_CLI_COMMANDS_HPP
#define TABCL_CLI_COMMANDS_HPP

#include "tabcl/harness/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tabcl {

// A sweep document is an experiment config plus the sweep axes
// ("strategies", "fractions", "seeds") and an "output_dir".
struct SweepDocument {
  ExperimentConfig base;
  std::vector<std::string> strategies; // labels; "pjr" expands over fractions
  std::vector<Scalar> fractions;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
};

SweepDocument parse_sweep_document(const std::string& text);

struct RunOptions {
  std::string config_path;
  std::string out_root; // overrides config / TABCL_OUT
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<Scalar> fractions;
  bool force = false;
  int jobs = 1;
};

// Fully materialized sweep cells, in execution order.
std::vector<ExperimentConfig> materialize_cells(const SweepDocument& doc,
                                                const RunOptions& opts);

std::string resolve_out_root(const std::string& flag_value, const std::string& config_value);

int cmd_run(const RunOptions& opts);
int cmd_report(const std::string& out_root);
int cmd_plot(const std::string& out_root, const std::string& kind);
int cmd_list(const std::string& out_root);

} // namespace tabcl

#endif
