#include "tabcl/data/scenario.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace tabcl {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::task_il: return "task_il";
    case Scenario::class_il: return "class_il";
    case Scenario::domain_il: return "domain_il";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "task_il") return Scenario::task_il;
  if (s == "class_il") return Scenario::class_il;
  if (s == "domain_il") return Scenario::domain_il;
  throw ConfigError("unknown scenario '" + s + "'");
}

int Task::local_label(int global_class) const {
  for (std::size_t i = 0; i < active_classes.size(); ++i)
    if (active_classes[i] == global_class) return static_cast<int>(i);
  throw DimensionError("class " + std::to_string(global_class) +
                       " is not active in task " + std::to_string(task_id));
}

Scenario TaskStream::scenario() const {
  if (tasks.empty()) throw ConfigError("empty task stream");
  return tasks.front().scenario;
}

std::vector<int> TaskStream::classes_seen_through(int t) const {
  std::vector<int> seen;
  std::set<int> present;
  for (int i = 0; i <= t && i < static_cast<int>(tasks.size()); ++i)
    for (const int c : tasks[static_cast<std::size_t>(i)].active_classes)
      if (present.insert(c).second) seen.push_back(c);
  return seen;
}

void TaskStream::validate() const {
  if (!dataset) throw ConfigError("task stream has no dataset");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    if (t.task_id != static_cast<int>(i))
      throw ConfigError("task ids must be consecutive from 0");
    std::set<Index> train(t.train_indices.begin(), t.train_indices.end());
    for (const Index idx : t.test_indices)
      if (train.count(idx))
        throw ConfigError("task " + std::to_string(i) + ": train/test overlap");
    if (t.scenario != Scenario::domain_il) {
      const std::set<int> active(t.active_classes.begin(), t.active_classes.end());
      auto check = [&](const IndexList& idxs) {
        for (const Index idx : idxs)
          if (!active.count(dataset->labels[idx]))
            throw ConfigError("task " + std::to_string(i) +
                              ": sample with label outside active classes");
      };
      check(t.train_indices);
      check(t.test_indices);
    }
  }
}

namespace {

std::vector<int> order_classes(const LabeledDataset& ds, const SplitConfig& cfg) {
  const int k = ds.n_classes();
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
  switch (cfg.class_order) {
    case ClassOrder::label_order:
      break;
    case ClassOrder::frequency_desc: {
      const auto counts = ds.class_counts();
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
      });
      break;
    }
    case ClassOrder::shuffled: {
      Rng rng(derive_seed(cfg.seed, "class_order"));
      rng.shuffle(order);
      break;
    }
  }
  return order;
}

// Seeded stratified split of one class's samples inside one task scope.
void split_group(const IndexList& group, Scalar train_ratio, Rng& rng,
                 IndexList& train_out, IndexList& test_out) {
  IndexList shuffled = group;
  rng.shuffle(shuffled);
  const Index n = static_cast<Index>(shuffled.size());
  Index train_n;
  if (n <= 1) {
    train_n = n;
  } else {
    train_n = static_cast<Index>(std::floor(train_ratio * static_cast<Scalar>(n)));
    train_n = std::clamp<Index>(train_n, 1, n - 1);
  }
  for (Index i = 0; i < n; ++i)
    (i < train_n ? train_out : test_out).push_back(shuffled[static_cast<std::size_t>(i)]);
}

std::vector<IndexList> indices_by_class(const LabeledDataset& ds) {
  std::vector<IndexList> by_class(static_cast<std::size_t>(ds.n_classes()));
  for (Index i = 0; i < ds.n_samples(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return by_class;
}

TaskStream build_class_partition(const LabeledDataset& ds, Scenario scenario,
                                 const std::vector<std::vector<int>>& class_groups,
                                 const SplitConfig& cfg) {
  const auto by_class = indices_by_class(ds);
  TaskStream stream;
  stream.dataset = &ds;
  stream.total_classes = ds.n_classes();
  for (std::size_t t = 0; t < class_groups.size(); ++t) {
    Task task;
    task.task_id = static_cast<int>(t);
    task.scenario = scenario;
    task.active_classes = class_groups[t];
    for (const int c : class_groups[t]) {
      Rng rng(derive_seed(cfg.seed, "split", static_cast<std::uint64_t>(c)));
      split_group(by_class[static_cast<std::size_t>(c)], cfg.train_ratio, rng,
                  task.train_indices, task.test_indices);
    }
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

} // namespace

TaskStream build_task_il(const LabeledDataset& ds, int classes_per_task,
                         const SplitConfig& cfg) {
  if (classes_per_task < 1)
    throw ConfigError("task_il: classes_per_task must be >= 1");
  if (ds.n_classes() < 1) throw ConfigError("task_il: dataset has no classes");
  const auto order = order_classes(ds, cfg);
  std::vector<std::vector<int>> groups;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(classes_per_task)) {
    const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(classes_per_task));
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // A trailing group smaller than classes_per_task is the remainder task;
  // merge it into nothing (it stands alone) so no class is dropped.
  return build_class_partition(ds, Scenario::task_il, groups, cfg);
}

TaskStream build_class_il(const LabeledDataset& ds, int initial_classes,
                          int increment, const SplitConfig& cfg) {
  const int k = ds.n_classes();
  if (initial_classes < 1 || initial_classes > k)
    throw ConfigError("class_il: initial_classes must be in [1, n_classes]");
  if (increment < 1 && initial_classes < k)
    throw ConfigError("class_il: increment must be >= 1");
  const auto order = order_classes(ds, cfg);
  std::vector<std::vector<int>> groups;
  groups.emplace_back(order.begin(), order.begin() + initial_classes);
  int next = initial_classes;
  while (next < k) {
    const int end = std::min(k, next + increment);
    groups.emplace_back(order.begin() + next, order.begin() + end);
    next = end;
  }
  return build_class_partition(ds, Scenario::class_il, groups, cfg);
}

TaskStream build_domain_il(const LabeledDataset& ds, const SplitConfig& cfg) {
  if (!ds.has_month())
    throw SchemaError("domain_il: dataset has no month buckets");
  if (ds.n_classes() != 2)
    throw ConfigError("domain_il: expected binary labels, got " +
                      std::to_string(ds.n_classes()) + " classes");
  int max_month = 0;
  for (const int m : ds.month) max_month = std::max(max_month, m);

  std::vector<std::vector<IndexList>> per_month(
      static_cast<std::size_t>(max_month + 1), std::vector<IndexList>(2));
  for (Index i = 0; i < ds.n_samples(); ++i)
    per_month[static_cast<std::size_t>(ds.month[static_cast<std::size_t>(i)])]
             [static_cast<std::size_t>(ds.labels[i])].push_back(i);

  TaskStream stream;
  stream.dataset = &ds;
  stream.total_classes = 2;
  for (int m = 0; m <= max_month; ++m) {
    const auto& groups = per_month[static_cast<std::size_t>(m)];
    if (groups[0].empty() && groups[1].empty())
      throw SchemaError("domain_il: month " + std::to_string(m) +
                        " has no samples (months must be contiguous from 0)");
    Task task;
    task.task_id = m;
    task.scenario = Scenario::domain_il;
    task.active_classes = {0, 1};
    for (int c = 0; c < 2; ++c) {
      Rng rng(derive_seed(cfg.seed, "month_split",
                          static_cast<std::uint64_t>(m) * 2 + static_cast<std::uint64_t>(c)));
      split_group(groups[static_cast<std::size_t>(c)], cfg.train_ratio, rng,
                  task.train_indices, task.test_indices);
    }
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

} // namespace tabcl
