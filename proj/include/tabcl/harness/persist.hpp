#ifndef TABCL_HARNESS_PERSIST_HPP
#define TABCL_HARNESS_PERSIST_HPP

#include "tabcl/harness/run.hpp"

#include <string>
#include <vector>

namespace tabcl {

// One directory per run under <out_root>/runs/: run.json carries the
// deterministic document (config echo, matrices, metrics, sample ledger);
// timing.json carries the measured wall times. The newline-delimited
// index.jsonl at the root is append-only.

std::string run_dir_for(const ExperimentConfig& cfg, const std::string& out_root);
bool run_exists(const ExperimentConfig& cfg, const std::string& out_root);

std::string persist_run(const RunResult& result, const std::string& out_root);
RunResult load_run(const std::string& run_dir);

struct IndexEntry {
  std::string dir; // relative to the output root
  std::string scenario;
  std::string strategy;
  std::uint64_t seed = 0;
  std::string config_hash;
};
std::vector<IndexEntry> read_index(const std::string& out_root);
std::vector<RunResult> load_all_runs(const std::string& out_root);

} // namespace tabcl

#endif
