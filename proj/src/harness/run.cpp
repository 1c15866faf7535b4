#include "tabcl/harness/run.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace tabcl {

namespace {

ActiveUnitMask mask_of(const std::vector<int>& classes) {
  ActiveUnitMask m;
  m.active = classes;
  return m;
}

// Held-out loss for early stopping: masked CE through the strategy's
// classifier in eval mode.
Scalar holdout_loss(const Strategy& strategy, const RunData& data, const IndexList& rows,
                    const ActiveUnitMask& mask) {
  const ClassifierModel* m = strategy.classifier_model();
  if (!m || rows.empty()) return 0.0;
  const Mat logits = infer_logits_masked(*m, data.features(rows), mask);
  const IntVec local = local_labels(mask.active, data.labels(rows));
  return cross_entropy(logits, local).loss;
}

} // namespace

std::pair<Scalar, Scalar> compute_metrics(const std::vector<Scalar>& per_increment) {
  if (per_increment.empty()) throw ConfigError("compute_metrics: empty curve");
  Scalar sum = 0.0;
  Scalar lowest = per_increment.front();
  for (const Scalar a : per_increment) {
    sum += a;
    lowest = std::min(lowest, a);
  }
  return {sum / static_cast<Scalar>(per_increment.size()), lowest};
}

AggregateResult aggregate_seeds(const std::vector<RunResult>& results) {
  if (results.empty()) throw ConfigError("aggregate_seeds: no results");
  // All results must share the config modulo seed.
  auto group_key = [](const RunResult& r) {
    nlohmann::json j = nlohmann::json::parse(r.config_json);
    j.erase("seed");
    return j.dump();
  };
  const std::string key = group_key(results.front());
  std::set<std::uint64_t> seeds;
  for (const auto& r : results) {
    if (group_key(r) != key)
      throw ConfigError("aggregate_seeds: mixed configurations");
    seeds.insert(r.seed);
  }
  if (seeds.size() != results.size())
    throw ConfigError("aggregate_seeds: duplicate seeds in group");

  auto stats = [&](auto field) {
    Scalar sum = 0.0;
    for (const auto& r : results) sum += field(r);
    const Scalar mean = sum / static_cast<Scalar>(results.size());
    Scalar sq = 0.0;
    for (const auto& r : results) sq += (field(r) - mean) * (field(r) - mean);
    const Scalar stdev =
        results.size() > 1 ? std::sqrt(sq / static_cast<Scalar>(results.size() - 1)) : 0.0;
    return std::make_pair(mean, stdev);
  };
  AggregateResult out;
  out.n_seeds = static_cast<int>(results.size());
  std::tie(out.mean_of_mean, out.std_of_mean) =
      stats([](const RunResult& r) { return r.mean; });
  std::tie(out.mean_of_min, out.std_of_min) =
      stats([](const RunResult& r) { return r.min; });
  out.report_std_mean =
      out.n_seeds > 1 && out.std_of_mean >= AggregateResult::kStdSuppression;
  out.report_std_min =
      out.n_seeds > 1 && out.std_of_min >= AggregateResult::kStdSuppression;
  return out;
}

EvalRow evaluate_after_task(const Strategy& strategy, const TaskStream& stream,
                            const RunData& data, int task_index) {
  const Scenario scenario = stream.scenario();
  EvalRow row;
  long long total_hits = 0, total_count = 0;
  for (int j = 0; j <= task_index; ++j) {
    const Task& task = stream.tasks[static_cast<std::size_t>(j)];
    ActiveUnitMask mask;
    switch (scenario) {
      case Scenario::task_il: mask = mask_of(task.active_classes); break;
      case Scenario::class_il: mask = mask_of(stream.classes_seen_through(task_index)); break;
      case Scenario::domain_il: mask = mask_of({0, 1}); break;
    }
    const Mat x = data.features(task.test_indices);
    const IntVec y = data.labels(task.test_indices);
    const IntVec pred = strategy.predict(x, mask);
    long long hits = 0;
    for (Index i = 0; i < y.size(); ++i)
      if (pred[i] == y[i]) ++hits;
    row.per_unit.push_back(y.size() > 0
                               ? static_cast<Scalar>(hits) / static_cast<Scalar>(y.size())
                               : 0.0);
    total_hits += hits;
    total_count += y.size();
  }
  if (scenario == Scenario::task_il) {
    // given task identity, the curve value is the average over tasks seen
    Scalar sum = 0.0;
    for (const Scalar a : row.per_unit) sum += a;
    row.per_increment = sum / static_cast<Scalar>(row.per_unit.size());
  } else {
    // cumulative test set over everything seen so far
    row.per_increment =
        total_count > 0 ? static_cast<Scalar>(total_hits) / static_cast<Scalar>(total_count)
                        : 0.0;
  }
  return row;
}

LabeledDataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.source == DatasetSpec::Source::synthetic)
    return generate_synthetic_stream(cfg.dataset.synthetic);
  return load_tabular(cfg.dataset.path, cfg.dataset.format);
}

TaskStream build_stream(const ExperimentConfig& cfg, const LabeledDataset& ds) {
  SplitConfig split;
  split.train_ratio = cfg.scenario.train_ratio;
  split.seed = derive_seed(cfg.seed, "split");
  split.class_order = cfg.scenario.class_order;
  switch (cfg.scenario.kind) {
    case Scenario::task_il:
      return build_task_il(ds, cfg.scenario.classes_per_task, split);
    case Scenario::class_il:
      return build_class_il(ds, cfg.scenario.initial_classes, cfg.scenario.increment, split);
    case Scenario::domain_il:
      return build_domain_il(ds, split);
  }
  throw ConfigError("unknown scenario");
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  auto strategy = make_strategy(cfg.strategy);
  return run_experiment(cfg, *strategy);
}

RunResult run_experiment(const ExperimentConfig& cfg, Strategy& strategy) {
  validate_pairing(cfg.strategy, cfg.scenario.kind);
  if (strategy.kind() != cfg.strategy)
    throw ConfigError("strategy object does not match the configured kind");

  const LabeledDataset ds = build_dataset(cfg);
  const TaskStream stream = build_stream(cfg, ds);
  RunData data(ds);

  const bool boolean = ds.feature_kind == FeatureKind::boolean;
  if (boolean) {
    // Static preprocessing over every task's train split; test rows are
    // never touched.
    IndexList all_train;
    for (const Task& t : stream.tasks)
      all_train.insert(all_train.end(), t.train_indices.begin(), t.train_indices.end());
    data.set_variance_filter(
        VarianceFilter::fit(data.raw_rows(all_train), cfg.variance_threshold));
  } else if (cfg.standardize) {
    data.enable_standardizer();
  }

  const Index batch_size = cfg.batch_size > 0 ? cfg.batch_size : (boolean ? 32 : 256);
  const int epochs = cfg.epochs_per_task > 0 ? cfg.epochs_per_task : (boolean ? 20 : 10);

  RunSettings settings;
  settings.model = cfg.model;
  settings.model.input_dim = data.input_dim();
  if (settings.model.n_output_units == 0)
    settings.model.n_output_units = stream.total_classes;
  settings.optimizer = cfg.optimizer;
  settings.batch_size = batch_size;
  settings.params = cfg.params;
  settings.scenario = cfg.scenario.kind;
  settings.feature_kind = ds.feature_kind;
  settings.seed = cfg.seed;

  // The standardizer must see the first chunk before the model evaluates
  // anything, but its updates follow the monthly flow inside the task loop.
  strategy.init_run(settings, data, stream);

  RunResult result;
  result.config_json = experiment_config_to_json(cfg);
  result.seed = cfg.seed;
  result.scenario = to_string(cfg.scenario.kind);
  result.strategy = cfg.strategy_label();

  Rng hook_rng(derive_seed(cfg.seed, "hooks"));
  const bool early_stopping = cfg.early_stopping_effective();

  for (int ti = 0; ti < static_cast<int>(stream.tasks.size()); ++ti) {
    const Task& task = stream.tasks[static_cast<std::size_t>(ti)];

    // Only the new month's training data updates the running moments.
    if (data.has_standardizer())
      data.standardizer().partial_update(
          data.variance_filter()
              ? data.variance_filter()->apply(data.raw_rows(task.train_indices))
              : data.raw_rows(task.train_indices));

    TaskView view;
    view.task_index = ti;
    view.tasks_total = static_cast<int>(stream.tasks.size());
    view.new_classes = task.active_classes;
    view.seen_classes = stream.classes_seen_through(ti);
    view.prev_seen_classes = ti > 0 ? stream.classes_seen_through(ti - 1)
                                    : std::vector<int>{};
    switch (cfg.scenario.kind) {
      case Scenario::task_il: view.train_mask = mask_of(task.active_classes); break;
      case Scenario::class_il: view.train_mask = mask_of(view.seen_classes); break;
      case Scenario::domain_il: view.train_mask = mask_of({0, 1}); break;
    }
    view.old_mask = mask_of(view.prev_seen_classes);
    if (cfg.scenario.kind == Scenario::domain_il && ti > 0)
      view.old_mask = mask_of({0, 1});
    view.current_train = task.train_indices;
    IndexList pool = task.train_indices;
    view.pool = &pool;

    strategy.reset_ledger();
    strategy.before_task(view, data, hook_rng);

    TaskLedgerEntry entry;
    entry.task = ti;
    entry.replay_pool = strategy.ledger().replay_pool;

    IndexList train_pool = pool;
    IndexList holdout;
    if (early_stopping) {
      Rng holdout_rng(derive_seed(cfg.seed, "holdout", static_cast<std::uint64_t>(ti)));
      holdout_rng.shuffle(train_pool);
      const auto held = static_cast<std::size_t>(std::max<Index>(
          1, static_cast<Index>(std::floor(cfg.early_stopping.holdout_fraction *
                                           static_cast<Scalar>(train_pool.size())))));
      if (train_pool.size() > held) {
        holdout.assign(train_pool.begin(), train_pool.begin() + static_cast<std::ptrdiff_t>(held));
        train_pool.erase(train_pool.begin(), train_pool.begin() + static_cast<std::ptrdiff_t>(held));
      }
    }
    entry.current_pool = static_cast<long long>(train_pool.size());

    std::map<Index, long long>* audit = nullptr;
    if (cfg.audit_samples) {
      result.sample_audit.emplace_back();
      audit = &result.sample_audit.back();
    }

    Rng batch_rng(derive_seed(cfg.seed, "train", static_cast<std::uint64_t>(ti)));
    Scalar best_holdout = std::numeric_limits<Scalar>::infinity();
    int epochs_since_best = 0;
    Scalar wall = 0.0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
      Rng shuffle_rng(derive_seed(cfg.seed, "shuffle",
                                  static_cast<std::uint64_t>(ti) * 100003 +
                                      static_cast<std::uint64_t>(epoch)));
      IndexList order = train_pool;
      shuffle_rng.shuffle(order);

      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(batch_size));
        const IndexList batch_rows(order.begin() + static_cast<std::ptrdiff_t>(at),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
        const Mat x = data.features(batch_rows);
        const IntVec y = data.labels(batch_rows);
        strategy.train_batch(x, y, batch_rows, view, data, batch_rng);
        ++entry.steps;
        entry.trained_samples += static_cast<long long>(batch_rows.size());
        if (audit)
          for (const Index row : batch_rows) ++(*audit)[row];
      }
      wall += std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
      ++entry.epochs_run;

      if (early_stopping && !holdout.empty()) {
        const Scalar loss = holdout_loss(strategy, data, holdout, view.train_mask);
        if (loss < best_holdout - 1e-12) {
          best_holdout = loss;
          epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.early_stopping.patience) {
          break;
        }
      }
    }

    strategy.after_task(view, data, hook_rng);
    entry.buffer_draws = strategy.ledger().buffer_draws;
    entry.generated = strategy.ledger().generated;
    entry.wall_seconds = wall;
    result.ledger.push_back(entry);

    const EvalRow row = evaluate_after_task(strategy, stream, data, ti);
    result.accuracy_matrix.push_back(row.per_unit);
    result.per_increment.push_back(row.per_increment);
  }

  std::tie(result.mean, result.min) = compute_metrics(result.per_increment);
  return result;
}

} // namespace tabcl
