#ifndef TABCL_STRATEGIES_STRATEGY_HPP
#define TABCL_STRATEGIES_STRATEGY_HPP

#include "tabcl/data/run_data.hpp"
#include "tabcl/data/scenario.hpp"
#include "tabcl/model/merged.hpp"
#include "tabcl/model/mlp.hpp"
#include "tabcl/model/optimizer.hpp"
#include "tabcl/model/vae.hpp"
#include "tabcl/strategies/icarl.hpp"
#include "tabcl/strategies/penalties.hpp"
#include "tabcl/strategies/replay.hpp"
#include "tabcl/strategies/state.hpp"

#include <memory>
#include <optional>

namespace tabcl {

// Every tunable a method exposes; echoed into run metadata so reported
// numbers are reproducible from their config.
struct StrategyParams {
  Scalar lambda = 100.0;     // EWC / EWC-Online penalty weight
  Scalar gamma = 1.0;        // EWC-Online running-sum decay
  Scalar si_c = 0.1;         // SI regularization strength
  Scalar si_xi = 0.1;        // SI damping
  Scalar lwf_lambda0 = 1.0;  // LwF balance weight
  Scalar temperature = 2.0;  // distillation temperature (LwF, GR-D, iCaRL, RtF, BI-R)
  Index fisher_samples = 1024;
  std::string fisher_mode = "model_sampled";
  Index er_capacity = 1000;
  Index agem_capacity = 1000;
  Index icarl_capacity = 2000;
  Scalar pjr_fraction = 0.2;
  Scalar generative_weight = 1.0; // weight of the ELBO inside merged-model losses
  Index vae_latent = 100;
  std::vector<Index> vae_widths;  // empty: mirror the classifier widths
  Scalar gate_fraction = 0.8;     // fraction of decoder units kept per class
  int internal_replay_layer = 1;  // BI-R replay level (0 = input space)
};

struct RunSettings {
  MLPConfig model; // input_dim and n_output_units already resolved
  OptimizerSpec optimizer;
  Index batch_size = 32;
  StrategyParams params;
  Scenario scenario = Scenario::task_il;
  FeatureKind feature_kind = FeatureKind::real;
  std::uint64_t seed = 0;
};

// Per-task slice the harness hands to the hooks.
struct TaskView {
  int task_index = 0;
  int tasks_total = 0;
  ActiveUnitMask train_mask;             // scenario-dependent active units
  ActiveUnitMask old_mask;               // classes seen before this task (may be empty)
  std::vector<int> new_classes;          // introduced by this task
  std::vector<int> seen_classes;         // through this task
  std::vector<int> prev_seen_classes;    // through the previous task
  IndexList current_train;               // the task's own train split
  IndexList* pool = nullptr;             // mutable training pool
};

// Replay bookkeeping the harness folds into the run ledger.
struct ReplayLedger {
  long long replay_pool = 0;   // samples added to the task's training pool
  long long buffer_draws = 0;  // step-level draws from stored buffers
  long long generated = 0;     // generator-produced replay samples
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual StrategyKind kind() const = 0;

  virtual void init_run(const RunSettings& settings, const RunData& data,
                        const TaskStream& stream) = 0;
  virtual void before_task(TaskView& view, const RunData& data, Rng& rng) {
    (void)view; (void)data; (void)rng;
  }
  // One optimizer update on the batch; returns this step's loss.
  virtual Scalar train_batch(const Mat& x, const IntVec& y, const IndexList& batch_rows,
                             const TaskView& view, const RunData& data, Rng& rng) = 0;
  virtual void after_task(const TaskView& view, const RunData& data, Rng& rng) {
    (void)view; (void)data; (void)rng;
  }

  virtual IntVec predict(const Mat& x, const ActiveUnitMask& mask) const;
  virtual const ClassifierModel* classifier_model() const = 0;

  ReplayLedger& ledger() { return ledger_; }
  void reset_ledger() { ledger_ = {}; }

 protected:
  ReplayLedger ledger_;
};

// Factory; throws ConfigError for an invalid (kind, scenario) pairing.
// Hyperparameters arrive through RunSettings at init_run.
void validate_pairing(StrategyKind kind, Scenario scenario);
std::unique_ptr<Strategy> make_strategy(StrategyKind kind);

// ---- concrete strategies (declared here so tests can inspect state) ----

class ClassifierStrategyBase : public Strategy {
 public:
  const ClassifierModel* classifier_model() const override {
    return model_ ? &*model_ : nullptr;
  }
  ClassifierModel& model() { return *model_; }
  Optimizer& optimizer() { return *opt_; }

  void init_run(const RunSettings& settings, const RunData& data,
                const TaskStream& stream) override;

 protected:
  // Cross-entropy step on the view's training mask.
  Scalar plain_ce_step(const Mat& x, const IntVec& y, const ActiveUnitMask& mask, Rng& rng);
  // Forward + masked CE + penalty-gradient hook; no optimizer step.
  Scalar ce_backward(const Mat& x, const IntVec& y, const ActiveUnitMask& mask,
                     Scalar weight, Rng& rng);

  RunSettings settings_;
  std::optional<ClassifierModel> model_;
  std::optional<Optimizer> opt_;
};

class NoneStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::none; }
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
};

class JointStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::joint; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  void before_task(TaskView& view, const RunData& data, Rng& rng) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;

 private:
  const TaskStream* stream_ = nullptr;
};

class PjrStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::pjr; }
  void before_task(TaskView& view, const RunData& data, Rng& rng) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  const PJRStore& store() const { return store_; }

 private:
  PJRStore store_;
};

class EwcStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::ewc; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  const EWCState& state() const { return state_; }

 private:
  EWCState state_;
};

class OnlineEwcStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::ewc_online; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  const OnlineEWCState& state() const { return state_; }

 private:
  OnlineEWCState state_;
};

class SiStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::si; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  const SIState& state() const { return state_; }

 private:
  SIState state_;
};

class LwfStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::lwf; }
  void before_task(TaskView& view, const RunData& data, Rng& rng) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  bool has_teacher() const { return teacher_.has_value(); }

 private:
  std::optional<ClassifierModel> teacher_;
};

class GrStrategy final : public ClassifierStrategyBase {
 public:
  explicit GrStrategy(bool with_distillation) : distill_(with_distillation) {}
  StrategyKind kind() const override {
    return distill_ ? StrategyKind::gr_distill : StrategyKind::gr;
  }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  VAEModel& generator() { return *generator_; }
  bool has_snapshots() const { return prev_model_.has_value(); }

 private:
  bool distill_;
  std::optional<VAEModel> generator_;
  std::optional<Optimizer> generator_opt_;
  std::optional<ClassifierModel> prev_model_; // frozen copies for replay
  std::optional<VAEModel> prev_generator_;
};

// RtF is the merged model with the standard prior, input-level replay and no
// gating; BI-R adds the mixture prior (conditional replay), decoder gating
// and internal replay.
class MergedReplayStrategy final : public Strategy {
 public:
  explicit MergedReplayStrategy(StrategyKind kind) : kind_(kind) {}
  StrategyKind kind() const override { return kind_; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  void before_task(TaskView& view, const RunData& data, Rng& rng) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  const ClassifierModel* classifier_model() const override {
    return merged_ ? &merged_->classifier() : nullptr;
  }
  MergedGenerativeClassifier& merged() { return *merged_; }
  bool has_snapshot() const { return prev_.has_value(); }

 private:
  StrategyKind kind_;
  RunSettings settings_;
  std::optional<MergedGenerativeClassifier> merged_;
  std::optional<Optimizer> opt_;
  std::optional<MergedGenerativeClassifier> prev_;
};

class ErStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::er; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList& batch_rows,
                     const TaskView& view, const RunData& data, Rng& rng) override;
  const ReservoirBuffer& buffer() const { return *buffer_; }

 private:
  std::optional<ReservoirBuffer> buffer_;
};

class AgemStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::agem; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData& data, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  const ReservoirBuffer& buffer() const { return *buffer_; }

 private:
  std::optional<ReservoirBuffer> buffer_;
};

class IcarlStrategy final : public ClassifierStrategyBase {
 public:
  StrategyKind kind() const override { return StrategyKind::icarl; }
  void init_run(const RunSettings&, const RunData&, const TaskStream&) override;
  void before_task(TaskView& view, const RunData& data, Rng& rng) override;
  Scalar train_batch(const Mat& x, const IntVec& y, const IndexList&, const TaskView& view,
                     const RunData&, Rng& rng) override;
  void after_task(const TaskView& view, const RunData& data, Rng& rng) override;
  IntVec predict(const Mat& x, const ActiveUnitMask& mask) const override;
  const ExemplarSets& exemplars() const { return exemplars_; }

 private:
  ExemplarSets exemplars_;
  std::optional<ClassifierModel> teacher_;
  const RunData* data_ = nullptr;
};

} // namespace tabcl

#endif
