#include "tabcl/strategies/replay.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <cmath>

namespace tabcl {

std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::none: return "none";
    case StrategyKind::joint: return "joint";
    case StrategyKind::pjr: return "pjr";
    case StrategyKind::ewc: return "ewc";
    case StrategyKind::ewc_online: return "ewc_online";
    case StrategyKind::si: return "si";
    case StrategyKind::lwf: return "lwf";
    case StrategyKind::gr: return "gr";
    case StrategyKind::gr_distill: return "gr_distill";
    case StrategyKind::rtf: return "rtf";
    case StrategyKind::bir: return "bir";
    case StrategyKind::er: return "er";
    case StrategyKind::agem: return "agem";
    case StrategyKind::icarl: return "icarl";
  }
  return "?";
}

StrategyKind strategy_kind_from_string(const std::string& s, Scalar* pjr_fraction) {
  if (s.rfind("pjr", 0) == 0) {
    if (s.size() > 3) {
      if (s[3] != ':' && s[3] != '=')
        throw ConfigError("unknown strategy '" + s + "'");
      const Scalar f = std::stod(s.substr(4));
      if (f < 0.0 || f > 1.0)
        throw ConfigError("pjr fraction must be in [0,1], got " + s.substr(4));
      if (pjr_fraction) *pjr_fraction = f;
    }
    return StrategyKind::pjr;
  }
  for (const StrategyKind k :
       {StrategyKind::none, StrategyKind::joint, StrategyKind::ewc,
        StrategyKind::ewc_online, StrategyKind::si, StrategyKind::lwf,
        StrategyKind::gr, StrategyKind::gr_distill, StrategyKind::rtf,
        StrategyKind::bir, StrategyKind::er, StrategyKind::agem,
        StrategyKind::icarl})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown strategy '" + s + "'");
}

void ReservoirBuffer::insert(Index dataset_index, Rng& rng) {
  ++seen_;
  if (size() < capacity_) {
    items_.push_back(dataset_index);
    return;
  }
  const std::uint64_t j = rng.uniform_below(static_cast<std::uint64_t>(seen_));
  if (j < static_cast<std::uint64_t>(capacity_))
    items_[static_cast<std::size_t>(j)] = dataset_index;
}

IndexList ReservoirBuffer::draw(Index n, Rng& rng) const {
  const Index take = std::min<Index>(n, size());
  IndexList out;
  out.reserve(static_cast<std::size_t>(take));
  for (const std::size_t pos : rng.sample_without_replacement(
           items_.size(), static_cast<std::size_t>(take)))
    out.push_back(items_[pos]);
  return out;
}

Index PJRStore::total() const {
  Index n = 0;
  for (const auto& task : per_task) n += static_cast<Index>(task.size());
  return n;
}

IndexList PJRStore::all() const {
  IndexList out;
  out.reserve(static_cast<std::size_t>(total()));
  for (const auto& task : per_task) out.insert(out.end(), task.begin(), task.end());
  return out;
}

IndexList pjr_sample(const PJRStore& store, Scalar fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw ConfigError("pjr_sample: fraction must be in [0,1]");
  const IndexList past = store.all();
  const auto take = static_cast<std::size_t>(
      std::floor(fraction * static_cast<Scalar>(past.size())));
  Rng rng(derive_seed(seed, "pjr_sample"));
  IndexList out;
  out.reserve(take);
  for (const std::size_t pos : rng.sample_without_replacement(past.size(), take))
    out.push_back(past[pos]);
  return out;
}

void LwFConfig::validate() const {
  if (lambda0 < 0.0) throw ConfigError("lwf: lambda0 must be >= 0");
  if (temperature <= 0.0) throw ConfigError("lwf: temperature must be > 0");
}

Mat distill_targets_from_logits(const Mat& full_logits, const ActiveUnitMask& mask,
                                Scalar temperature) {
  if (temperature <= 0.0) throw ConfigError("distill: temperature must be > 0");
  mask.validate(full_logits.cols());
  return softmax_rows(select_columns(full_logits, mask.active) / temperature);
}

Mat distill_targets(const ClassifierModel& teacher, const Mat& x,
                    const ActiveUnitMask& mask, Scalar temperature) {
  return distill_targets_from_logits(teacher.infer_logits(x), mask, temperature);
}

LwfLoss lwf_loss(const Mat& student_logits_full, const ActiveUnitMask& new_mask,
                 const IntVec& hard_labels, const ActiveUnitMask& old_mask,
                 const Mat& teacher_targets, const LwFConfig& cfg) {
  cfg.validate();
  LwfLoss out;
  const MaskedCeResult ce =
      masked_cross_entropy_full(student_logits_full, new_mask, hard_labels);
  out.ce_term = ce.loss;
  out.d_logits_full = ce.d_logits;

  if (cfg.lambda0 > 0.0 && !old_mask.active.empty()) {
    old_mask.validate(student_logits_full.cols());
    const Mat student_old = select_columns(student_logits_full, old_mask.active);
    const LossGrad kd = distillation_kl(student_old, teacher_targets, cfg.temperature);
    out.kd_term = kd.loss;
    for (std::size_t j = 0; j < old_mask.active.size(); ++j)
      out.d_logits_full.col(old_mask.active[j]) +=
          cfg.lambda0 * kd.grad.col(static_cast<Index>(j));
  }
  out.total = out.ce_term + cfg.lambda0 * out.kd_term;
  return out;
}

Scalar gr_mixing_ratio(int tasks_seen) {
  if (tasks_seen < 1) throw ConfigError("gr: tasks_seen must be >= 1");
  return 1.0 / static_cast<Scalar>(tasks_seen);
}

Scalar gr_mixed_loss(Scalar loss_current, Scalar loss_replay, Scalar ratio) {
  return ratio * loss_current + (1.0 - ratio) * loss_replay;
}

} // namespace tabcl
