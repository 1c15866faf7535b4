#include "tabcl/strategies/strategy.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <algorithm>
#include <sstream>

namespace tabcl {

namespace {

void check_finite(Scalar loss, const std::string& what) {
  if (!std::isfinite(loss))
    throw NumericError("non-finite loss in " + what + " (" + std::to_string(loss) + ")");
}

std::vector<int> labels_as_vector(const IntVec& y) {
  std::vector<int> out(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = y[i];
  return out;
}

} // namespace

IntVec Strategy::predict(const Mat& x, const ActiveUnitMask& mask) const {
  const ClassifierModel* m = classifier_model();
  if (!m) throw ConfigError("strategy: predict before init_run");
  return predict_masked(*m, x, mask);
}

void validate_pairing(StrategyKind kind, Scenario scenario) {
  if (kind == StrategyKind::icarl && scenario != Scenario::class_il)
    throw ConfigError("icarl is only defined for the class_il scenario");
}

void ClassifierStrategyBase::init_run(const RunSettings& settings, const RunData& data,
                                      const TaskStream& stream) {
  (void)data;
  (void)stream;
  settings_ = settings;
  model_.emplace(settings.model, derive_seed(settings.seed, "model"));
  opt_.emplace(settings.optimizer);
}

Scalar ClassifierStrategyBase::plain_ce_step(const Mat& x, const IntVec& y,
                                             const ActiveUnitMask& mask, Rng& rng) {
  return train_step(*model_, x, y, mask, *opt_, &rng);
}

Scalar ClassifierStrategyBase::ce_backward(const Mat& x, const IntVec& y,
                                           const ActiveUnitMask& mask, Scalar weight,
                                           Rng& rng) {
  const Mat logits = model_->forward(x, true, &rng);
  const MaskedCeResult ce = masked_cross_entropy_full(logits, mask, y);
  check_finite(ce.loss, "cross-entropy");
  model_->backward_from_logits(weight * ce.d_logits);
  return ce.loss;
}

Scalar NoneStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                 const TaskView& view, const RunData&, Rng& rng) {
  return plain_ce_step(x, y, view.train_mask, rng);
}

void JointStrategy::init_run(const RunSettings& settings, const RunData& data,
                             const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  stream_ = &stream;
}

void JointStrategy::before_task(TaskView& view, const RunData&, Rng&) {
  for (int t = 0; t < view.task_index; ++t) {
    const auto& past = stream_->tasks[static_cast<std::size_t>(t)].train_indices;
    view.pool->insert(view.pool->end(), past.begin(), past.end());
    ledger_.replay_pool += static_cast<long long>(past.size());
  }
}

Scalar JointStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                  const TaskView& view, const RunData&, Rng& rng) {
  return plain_ce_step(x, y, view.train_mask, rng);
}

void PjrStrategy::before_task(TaskView& view, const RunData&, Rng&) {
  const IndexList sample = pjr_sample(
      store_, settings_.params.pjr_fraction,
      derive_seed(settings_.seed, "pjr_task", static_cast<std::uint64_t>(view.task_index)));
  view.pool->insert(view.pool->end(), sample.begin(), sample.end());
  ledger_.replay_pool += static_cast<long long>(sample.size());
}

Scalar PjrStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                const TaskView& view, const RunData&, Rng& rng) {
  return plain_ce_step(x, y, view.train_mask, rng);
}

void PjrStrategy::after_task(const TaskView& view, const RunData&, Rng&) {
  store_.per_task.push_back(view.current_train);
}

void EwcStrategy::init_run(const RunSettings& settings, const RunData& data,
                           const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  state_ = EWCState{};
  state_.lambda = settings.params.lambda;
}

Scalar EwcStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                const TaskView& view, const RunData&, Rng& rng) {
  model_->zero_grad();
  const Scalar ce = ce_backward(x, y, view.train_mask, 1.0, rng);
  Scalar penalty = 0.0;
  if (!state_.anchors.empty()) {
    const Vec theta = model_->flat_params();
    penalty = ewc_penalty(theta, state_);
    model_->set_flat_grads(model_->flat_grads() + ewc_penalty_grad(theta, state_));
  }
  check_finite(ce + penalty, "ewc step");
  opt_->step(model_->blobs());
  return ce + penalty;
}

void EwcStrategy::after_task(const TaskView& view, const RunData& data, Rng& rng) {
  const Mat x = data.features(view.current_train);
  const IntVec y = data.labels(view.current_train);
  const Vec fisher = compute_fisher_diagonal(
      *model_, x, y, view.train_mask, settings_.params.fisher_samples,
      fisher_mode_from_string(settings_.params.fisher_mode), rng);
  state_.anchors.push_back({model_->flat_params(), fisher});
}

void OnlineEwcStrategy::init_run(const RunSettings& settings, const RunData& data,
                                 const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  state_ = OnlineEWCState{};
  state_.lambda = settings.params.lambda;
  state_.gamma = settings.params.gamma;
}

Scalar OnlineEwcStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                      const TaskView& view, const RunData&, Rng& rng) {
  model_->zero_grad();
  const Scalar ce = ce_backward(x, y, view.train_mask, 1.0, rng);
  Scalar penalty = 0.0;
  if (state_.has_anchor) {
    const Vec theta = model_->flat_params();
    penalty = ewc_online_penalty(theta, state_);
    model_->set_flat_grads(model_->flat_grads() + ewc_online_penalty_grad(theta, state_));
  }
  check_finite(ce + penalty, "ewc-online step");
  opt_->step(model_->blobs());
  return ce + penalty;
}

void OnlineEwcStrategy::after_task(const TaskView& view, const RunData& data, Rng& rng) {
  const Mat x = data.features(view.current_train);
  const IntVec y = data.labels(view.current_train);
  const Vec fisher = compute_fisher_diagonal(
      *model_, x, y, view.train_mask, settings_.params.fisher_samples,
      fisher_mode_from_string(settings_.params.fisher_mode), rng);
  state_ = ewc_online_consolidate(std::move(state_), fisher, model_->flat_params());
}

void SiStrategy::init_run(const RunSettings& settings, const RunData& data,
                          const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  state_ = SIState{};
  state_.c = settings.params.si_c;
  state_.xi = settings.params.si_xi;
  state_.ensure_size(model_->n_params());
  state_.theta_task_start = model_->flat_params();
  state_.theta_anchor = state_.theta_task_start;
}

Scalar SiStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                               const TaskView& view, const RunData&, Rng& rng) {
  model_->zero_grad();
  const Scalar ce = ce_backward(x, y, view.train_mask, 1.0, rng);
  const Vec theta_before = model_->flat_params();
  const Scalar penalty = si_penalty(theta_before, state_);
  if (penalty != 0.0)
    model_->set_flat_grads(model_->flat_grads() + si_penalty_grad(theta_before, state_));
  check_finite(ce + penalty, "si step");
  const Vec grad_total = model_->flat_grads();
  opt_->step(model_->blobs());
  state_ = si_track(std::move(state_), grad_total, model_->flat_params() - theta_before);
  return ce + penalty;
}

void SiStrategy::after_task(const TaskView&, const RunData&, Rng&) {
  state_ = si_consolidate(std::move(state_), model_->flat_params());
}

void LwfStrategy::before_task(TaskView& view, const RunData&, Rng&) {
  if (view.task_index > 0) teacher_ = *model_;
}

Scalar LwfStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                const TaskView& view, const RunData&, Rng& rng) {
  if (!teacher_ || view.old_mask.active.empty())
    return plain_ce_step(x, y, view.train_mask, rng);

  LwFConfig cfg;
  cfg.lambda0 = settings_.params.lwf_lambda0;
  cfg.temperature = settings_.params.temperature;
  const Mat targets = distill_targets(*teacher_, x, view.old_mask, cfg.temperature);
  ActiveUnitMask new_mask;
  new_mask.active = view.new_classes;

  model_->zero_grad();
  const Mat logits = model_->forward(x, true, &rng);
  const LwfLoss loss = lwf_loss(logits, new_mask, y, view.old_mask, targets, cfg);
  check_finite(loss.total, "lwf step");
  model_->backward_from_logits(loss.d_logits_full);
  opt_->step(model_->blobs());
  return loss.total;
}

void GrStrategy::init_run(const RunSettings& settings, const RunData& data,
                          const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  VAEConfig vc;
  vc.encoder_widths =
      settings.params.vae_widths.empty() ? settings.model.hidden_widths
                                         : settings.params.vae_widths;
  vc.latent_dim = settings.params.vae_latent;
  vc.input_dim = settings.model.input_dim;
  vc.dropout_rate = settings.model.dropout_rate;
  vc.use_batch_norm = settings.model.use_batch_norm;
  vc.prior = LatentPrior::standard_normal;
  vc.recon_kind = settings.feature_kind;
  generator_.emplace(vc, derive_seed(settings.seed, "generator"));
  generator_opt_.emplace(settings.optimizer);
  prev_model_.reset();
  prev_generator_.reset();
}

Scalar GrStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                               const TaskView& view, const RunData&, Rng& rng) {
  const int tasks_seen = view.task_index + 1;
  const Scalar r = gr_mixing_ratio(tasks_seen);
  const bool replaying = prev_model_.has_value() && !view.prev_seen_classes.empty();

  model_->zero_grad();
  Scalar loss_cur = 0.0, loss_rep = 0.0;
  Mat x_rep;
  if (!replaying) {
    loss_cur = ce_backward(x, y, view.train_mask, 1.0, rng);
  } else {
    loss_cur = ce_backward(x, y, view.train_mask, r, rng);
    x_rep = sample_generator(*prev_generator_, x.rows(), rng);
    ledger_.generated += x.rows();
    ActiveUnitMask prev_mask;
    prev_mask.active = view.prev_seen_classes;
    if (!distill_) {
      const IntVec y_rep = predict_masked(*prev_model_, x_rep, prev_mask);
      loss_rep = ce_backward(x_rep, y_rep, prev_mask, 1.0 - r, rng);
    } else {
      const Mat targets =
          distill_targets(*prev_model_, x_rep, prev_mask, settings_.params.temperature);
      const Mat logits = model_->forward(x_rep, true, &rng);
      const Mat active = select_columns(logits, prev_mask.active);
      const LossGrad kd = distillation_kl(active, targets, settings_.params.temperature);
      loss_rep = kd.loss;
      Mat d_full = Mat::Zero(logits.rows(), logits.cols());
      for (std::size_t j = 0; j < prev_mask.active.size(); ++j)
        d_full.col(prev_mask.active[j]) = (1.0 - r) * kd.grad.col(static_cast<Index>(j));
      model_->backward_from_logits(d_full);
    }
  }
  const Scalar total =
      replaying ? gr_mixed_loss(loss_cur, loss_rep, r) : loss_cur;
  check_finite(total, "gr step");
  opt_->step(model_->blobs());

  // The generator rehearses its own replayed samples with the same ratio.
  generator_->zero_grad();
  Mat noise = rng.normal_mat(x.rows(), generator_->latent_dim());
  auto gen_terms =
      generator_->loss_backward(x, noise, true, &rng, nullptr, nullptr, replaying ? r : 1.0);
  Scalar gen_loss = gen_terms.total();
  if (replaying) {
    Mat noise_rep = rng.normal_mat(x_rep.rows(), generator_->latent_dim());
    gen_loss +=
        generator_->loss_backward(x_rep, noise_rep, true, &rng, nullptr, nullptr, 1.0 - r)
            .total();
  }
  check_finite(gen_loss, "gr generator step");
  generator_opt_->step(generator_->blobs());
  return total;
}

void GrStrategy::after_task(const TaskView&, const RunData&, Rng&) {
  prev_model_ = *model_;
  prev_generator_ = *generator_;
}

void MergedReplayStrategy::init_run(const RunSettings& settings, const RunData& data,
                                    const TaskStream& stream) {
  (void)data;
  settings_ = settings;
  MergedConfig mc;
  mc.classifier = settings.model;
  mc.latent_dim = settings.params.vae_latent;
  mc.recon_kind = settings.feature_kind;
  if (kind_ == StrategyKind::bir) {
    const int n_blocks = static_cast<int>(settings.model.hidden_widths.size());
    mc.internal_replay_layer = std::min(settings.params.internal_replay_layer, n_blocks);
    mc.prior = LatentPrior::gaussian_mixture;
    mc.n_modes = stream.total_classes;
    mc.gating = true;
    mc.gate_fraction = settings.params.gate_fraction;
  }
  merged_.emplace(mc, derive_seed(settings.seed, "merged"));
  opt_.emplace(settings.optimizer);
  prev_.reset();
}

void MergedReplayStrategy::before_task(TaskView& view, const RunData&, Rng& rng) {
  if (merged_->config().gating)
    for (const int c : view.new_classes)
      if (!merged_->has_gating_masks(c))
        merged_->draw_gating_masks(c, merged_->config().gate_fraction, rng);
}

Scalar MergedReplayStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                         const TaskView& view, const RunData&, Rng& rng) {
  const bool mixture = merged_->config().prior == LatentPrior::gaussian_mixture;
  const bool gating = merged_->config().gating;
  const int tasks_seen = view.task_index + 1;
  const Scalar r = gr_mixing_ratio(tasks_seen);
  const bool replaying = prev_.has_value() && !view.prev_seen_classes.empty();

  merged_->zero_grad();
  const std::vector<int> y_vec = labels_as_vector(y);
  MergedGenerativeClassifier::StepOptions cur;
  cur.mask = &view.train_mask;
  cur.hard_labels = &y;
  cur.gate_classes = (gating || mixture) ? &y_vec : nullptr;
  cur.conditional_kl = mixture;
  cur.loss_weight = replaying ? r : 1.0;
  cur.generative_weight = settings_.params.generative_weight;
  cur.training = true;
  cur.dropout_rng = &rng;
  Mat noise = rng.normal_mat(x.rows(), merged_->latent_dim());
  auto terms = merged_->loss_backward(x, noise, cur);
  Scalar total = terms.total();

  if (replaying) {
    const Index n_rep = x.rows();
    std::vector<int> classes(static_cast<std::size_t>(n_rep), 0);
    for (auto& c : classes)
      c = view.prev_seen_classes[static_cast<std::size_t>(
          rng.uniform_below(view.prev_seen_classes.size()))];
    const Mat z = prev_->sample_latent(n_rep, rng, classes);
    const Mat rhat = prev_->decode(z, gating ? &classes : nullptr);
    ledger_.generated += n_rep;

    const Mat teacher_logits = prev_->logits_from_representation(rhat);
    const Mat targets = distill_targets_from_logits(teacher_logits, view.old_mask,
                                                    settings_.params.temperature);
    MergedGenerativeClassifier::StepOptions rep;
    rep.mask = &view.old_mask;
    rep.soft_targets = &targets;
    rep.distill_temperature = settings_.params.temperature;
    rep.input_is_representation = true;
    rep.gate_classes = (gating || mixture) ? &classes : nullptr;
    rep.conditional_kl = mixture;
    rep.loss_weight = 1.0 - r;
    rep.generative_weight = settings_.params.generative_weight;
    rep.training = true;
    rep.dropout_rng = &rng;
    Mat noise_rep = rng.normal_mat(n_rep, merged_->latent_dim());
    total += merged_->loss_backward(rhat, noise_rep, rep).total();
  }
  check_finite(total, to_string(kind_) + " step");
  opt_->step(merged_->blobs());
  return total;
}

void MergedReplayStrategy::after_task(const TaskView& view, const RunData&, Rng&) {
  prev_ = *merged_;
  if (kind_ == StrategyKind::bir && merged_->internal_layer() > 0 && view.task_index == 0)
    merged_->set_lower_frozen(true);
}

void ErStrategy::init_run(const RunSettings& settings, const RunData& data,
                          const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  buffer_.emplace(settings.params.er_capacity);
}

Scalar ErStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList& batch_rows,
                               const TaskView& view, const RunData& data, Rng& rng) {
  const bool have_replay = buffer_->size() > 0;
  model_->zero_grad();
  Scalar loss;
  if (!have_replay) {
    loss = ce_backward(x, y, view.train_mask, 1.0, rng);
  } else {
    const Scalar loss_cur = ce_backward(x, y, view.train_mask, 0.5, rng);
    const IndexList rows = buffer_->draw(settings_.batch_size, rng);
    ledger_.buffer_draws += static_cast<long long>(rows.size());
    ActiveUnitMask seen;
    seen.active = view.seen_classes;
    const Scalar loss_rep =
        ce_backward(data.features(rows), data.labels(rows), seen, 0.5, rng);
    loss = 0.5 * (loss_cur + loss_rep);
  }
  check_finite(loss, "er step");
  opt_->step(model_->blobs());
  for (const Index row : batch_rows) buffer_->insert(row, rng);
  return loss;
}

void AgemStrategy::init_run(const RunSettings& settings, const RunData& data,
                            const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  buffer_.emplace(settings.params.agem_capacity);
}

Scalar AgemStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                 const TaskView& view, const RunData& data, Rng& rng) {
  model_->zero_grad();
  const Scalar loss = ce_backward(x, y, view.train_mask, 1.0, rng);
  check_finite(loss, "agem step");
  if (buffer_->size() > 0) {
    const Vec g = model_->flat_grads();
    model_->zero_grad();
    const IndexList rows = buffer_->draw(settings_.batch_size, rng);
    ledger_.buffer_draws += static_cast<long long>(rows.size());
    ActiveUnitMask seen;
    seen.active = view.seen_classes;
    ce_backward(data.features(rows), data.labels(rows), seen, 1.0, rng);
    const Vec g_ref = model_->flat_grads();
    model_->set_flat_grads(agem_project(g, g_ref));
  }
  opt_->step(model_->blobs());
  return loss;
}

void AgemStrategy::after_task(const TaskView& view, const RunData&, Rng& rng) {
  for (const Index row : view.current_train) buffer_->insert(row, rng);
}

void IcarlStrategy::init_run(const RunSettings& settings, const RunData& data,
                             const TaskStream& stream) {
  ClassifierStrategyBase::init_run(settings, data, stream);
  exemplars_ = ExemplarSets{};
  exemplars_.capacity = settings.params.icarl_capacity;
  data_ = &data;
}

void IcarlStrategy::before_task(TaskView& view, const RunData&, Rng&) {
  if (view.task_index > 0) teacher_ = *model_;
  const IndexList stored = exemplars_.all();
  view.pool->insert(view.pool->end(), stored.begin(), stored.end());
  ledger_.replay_pool += static_cast<long long>(stored.size());
}

Scalar IcarlStrategy::train_batch(const Mat& x, const IntVec& y, const IndexList&,
                                  const TaskView& view, const RunData&, Rng& rng) {
  ActiveUnitMask new_mask;
  new_mask.active = view.new_classes;
  model_->zero_grad();
  const Mat logits = model_->forward(x, true, &rng);
  Mat targets;
  const bool have_teacher = teacher_.has_value() && !view.old_mask.active.empty();
  if (have_teacher)
    targets = distill_targets(*teacher_, x, view.old_mask, settings_.params.temperature);
  const IcarlLoss loss =
      icarl_loss(logits, new_mask, y, view.old_mask, have_teacher ? &targets : nullptr,
                 settings_.params.temperature);
  check_finite(loss.total, "icarl step");
  model_->backward_from_logits(loss.d_logits_full);
  opt_->step(model_->blobs());
  return loss.total;
}

void IcarlStrategy::after_task(const TaskView& view, const RunData& data, Rng&) {
  const int classes_seen = static_cast<int>(view.seen_classes.size());
  const Index budget = exemplars_.per_class_budget(classes_seen);
  if (budget < 1)
    throw ConfigError("icarl: capacity " + std::to_string(exemplars_.capacity) +
                      " leaves no budget for " + std::to_string(classes_seen) + " classes");
  icarl_reduce_exemplars(exemplars_, budget);
  for (const int c : view.new_classes) {
    IndexList class_rows;
    for (const Index row : view.current_train)
      if (data.dataset().labels[row] == c) class_rows.push_back(row);
    if (class_rows.empty()) continue;
    exemplars_.sets[c] = icarl_construct_exemplars(*model_, data, class_rows, budget);
  }
}

IntVec IcarlStrategy::predict(const Mat& x, const ActiveUnitMask& mask) const {
  if (exemplars_.sets.empty() || !data_) return ClassifierStrategyBase::predict(x, mask);
  (void)mask; // classification covers every class holding exemplars
  return icarl_classify(*model_, *data_, x, exemplars_);
}

std::unique_ptr<Strategy> make_strategy(StrategyKind kind) {
  std::unique_ptr<Strategy> out;
  switch (kind) {
    case StrategyKind::none: out = std::make_unique<NoneStrategy>(); break;
    case StrategyKind::joint: out = std::make_unique<JointStrategy>(); break;
    case StrategyKind::pjr: out = std::make_unique<PjrStrategy>(); break;
    case StrategyKind::ewc: out = std::make_unique<EwcStrategy>(); break;
    case StrategyKind::ewc_online: out = std::make_unique<OnlineEwcStrategy>(); break;
    case StrategyKind::si: out = std::make_unique<SiStrategy>(); break;
    case StrategyKind::lwf: out = std::make_unique<LwfStrategy>(); break;
    case StrategyKind::gr: out = std::make_unique<GrStrategy>(false); break;
    case StrategyKind::gr_distill: out = std::make_unique<GrStrategy>(true); break;
    case StrategyKind::rtf:
      out = std::make_unique<MergedReplayStrategy>(StrategyKind::rtf);
      break;
    case StrategyKind::bir:
      out = std::make_unique<MergedReplayStrategy>(StrategyKind::bir);
      break;
    case StrategyKind::er: out = std::make_unique<ErStrategy>(); break;
    case StrategyKind::agem: out = std::make_unique<AgemStrategy>(); break;
    case StrategyKind::icarl: out = std::make_unique<IcarlStrategy>(); break;
  }
  if (!out) throw ConfigError("unknown strategy kind");
  return out;
}

} // namespace tabcl
