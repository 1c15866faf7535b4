#ifndef TABCL_HARNESS_CONFIG_HPP
#define TABCL_HARNESS_CONFIG_HPP

#include "tabcl/data/dataset.hpp"
#include "tabcl/data/scenario.hpp"
#include "tabcl/data/synthetic.hpp"
#include "tabcl/model/mlp.hpp"
#include "tabcl/model/optimizer.hpp"
#include "tabcl/strategies/strategy.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace tabcl {

struct EarlyStoppingConfig {
  int patience = 5;
  Scalar holdout_fraction = 0.1; // of the current training pool, seeded
};

struct DatasetSpec {
  enum class Source { synthetic, file };
  Source source = Source::synthetic;
  SyntheticStreamConfig synthetic;
  std::string path;
  TabularFormat format = TabularFormat::csv;
};

struct ScenarioSpec {
  Scenario kind = Scenario::class_il;
  int classes_per_task = 2; // task_il
  int initial_classes = 2;  // class_il
  int increment = 1;        // class_il
  Scalar train_ratio = 0.8;
  ClassOrder class_order = ClassOrder::frequency_desc;
};

struct ExperimentConfig {
  ScenarioSpec scenario;
  StrategyKind strategy = StrategyKind::none;
  StrategyParams params;
  DatasetSpec dataset;
  MLPConfig model;        // input_dim / n_output_units of 0 resolve from the data
  OptimizerSpec optimizer;
  Index batch_size = 0;   // 0: 32 for boolean data, 256 for real data
  int epochs_per_task = 0; // 0: 20 for boolean data, 10 for real data
  std::optional<bool> early_stopping_enabled; // unset: on for pjr runs only
  EarlyStoppingConfig early_stopping;
  Scalar variance_threshold = 1e-3; // boolean datasets
  bool standardize = true;          // real datasets
  bool audit_samples = false;
  std::uint64_t seed = 1;

  bool early_stopping_effective() const {
    return early_stopping_enabled.value_or(strategy == StrategyKind::pjr);
  }
  // "pjr:0.2" for pjr, the plain kind name otherwise.
  std::string strategy_label() const;
  // Same with characters safe for directory names.
  std::string strategy_path_label() const;
};

// Strict JSON codec: unknown keys are rejected.
std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);

std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

} // namespace tabcl

#endif
