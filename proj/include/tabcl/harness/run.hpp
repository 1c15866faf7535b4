#ifndef TABCL_HARNESS_RUN_HPP
#define TABCL_HARNESS_RUN_HPP

#include "tabcl/data/run_data.hpp"
#include "tabcl/harness/config.hpp"
#include "tabcl/strategies/strategy.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tabcl {

struct TaskLedgerEntry {
  int task = 0;
  long long steps = 0;
  int epochs_run = 0;
  long long current_pool = 0;    // task's own train split size (after holdout)
  long long replay_pool = 0;     // samples added to the pool by the strategy
  long long trained_samples = 0; // rows fed through train_batch, all epochs
  long long buffer_draws = 0;
  long long generated = 0;
  Scalar wall_seconds = 0.0; // optimizer-loop time; lives outside the
                             // deterministic run document
};

struct RunResult {
  int schema_version = 1;
  std::string config_json; // canonical echo of the materialized config
  std::uint64_t seed = 0;
  std::string scenario;
  std::string strategy;
  std::vector<std::vector<Scalar>> accuracy_matrix; // row i holds entries j <= i
  std::vector<Scalar> per_increment;                // a_i, one per task
  Scalar mean = 0.0;
  Scalar min = 0.0;
  std::vector<TaskLedgerEntry> ledger;
  // task -> (dataset row -> times trained); populated when audit_samples is on
  std::vector<std::map<Index, long long>> sample_audit;
};

// (mean, min) of the per-increment accuracy curve.
std::pair<Scalar, Scalar> compute_metrics(const std::vector<Scalar>& per_increment);

struct AggregateResult {
  int n_seeds = 0;
  Scalar mean_of_mean = 0.0, std_of_mean = 0.0;
  Scalar mean_of_min = 0.0, std_of_min = 0.0;
  // Sample std is suppressed below 1.0 accuracy point (0.01), and entirely
  // for single-seed groups.
  bool report_std_mean = false;
  bool report_std_min = false;

  static constexpr Scalar kStdSuppression = 0.01;
};
AggregateResult aggregate_seeds(const std::vector<RunResult>& results);

struct EvalRow {
  std::vector<Scalar> per_unit; // task_il: per task; class_il: per increment;
                                // domain_il: per month
  Scalar per_increment = 0.0;
};
EvalRow evaluate_after_task(const Strategy& strategy, const TaskStream& stream,
                            const RunData& data, int task_index);

// Full sequential run. The two-argument form uses a caller-owned strategy so
// its state can be inspected afterwards.
RunResult run_experiment(const ExperimentConfig& cfg);
RunResult run_experiment(const ExperimentConfig& cfg, Strategy& strategy);

// Dataset + stream construction shared by the harness and the tests.
LabeledDataset build_dataset(const ExperimentConfig& cfg);
TaskStream build_stream(const ExperimentConfig& cfg, const LabeledDataset& ds);

} // namespace tabcl

#endif
