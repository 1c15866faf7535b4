#ifndef TABCL_DATA_SCENARIO_HPP
#define TABCL_DATA_SCENARIO_HPP

#include "tabcl/data/dataset.hpp"
#include "tabcl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tabcl {

enum class Scenario { task_il, class_il, domain_il };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct Task {
  int task_id = 0;
  IndexList train_indices;
  IndexList test_indices;
  std::vector<int> active_classes; // ordered; classes introduced by this task
  Scenario scenario = Scenario::task_il;

  // Position of a global class id within this task's active ordering,
  // i.e. the head-local label.
  int local_label(int global_class) const;
};

struct TaskStream {
  std::vector<Task> tasks;
  const LabeledDataset* dataset = nullptr;
  int total_classes = 0;

  Index n_tasks() const { return static_cast<Index>(tasks.size()); }
  Scenario scenario() const;
  // Union of active_classes over tasks[0..t], in first-seen order.
  std::vector<int> classes_seen_through(int t) const;
  void validate() const;
};

enum class ClassOrder { frequency_desc, label_order, shuffled };

struct SplitConfig {
  Scalar train_ratio = 0.8;           // per-class (or per-month) stratified split
  std::uint64_t seed = 0;
  ClassOrder class_order = ClassOrder::frequency_desc;
};

// Equal class partitions; a non-divisible remainder goes into a final task.
TaskStream build_task_il(const LabeledDataset& ds, int classes_per_task,
                         const SplitConfig& cfg = {});

// Task 0 holds `initial_classes` classes; each later task adds `increment`
// new ones (final task carries any remainder).
TaskStream build_class_il(const LabeledDataset& ds, int initial_classes,
                          int increment, const SplitConfig& cfg = {});

// One binary task per month bucket.
TaskStream build_domain_il(const LabeledDataset& ds, const SplitConfig& cfg = {});

} // namespace tabcl

#endif
