#ifndef TABCL_STRATEGIES_REPLAY_HPP
#define TABCL_STRATEGIES_REPLAY_HPP

#include "tabcl/model/mlp.hpp"
#include "tabcl/strategies/state.hpp"

namespace tabcl {

// Temperature-scaled softmax of the teacher's logits over the mask's units.
Mat distill_targets(const ClassifierModel& teacher, const Mat& x,
                    const ActiveUnitMask& mask, Scalar temperature);
Mat distill_targets_from_logits(const Mat& full_logits, const ActiveUnitMask& mask,
                                Scalar temperature);

// CE on the new-class head plus lambda0-weighted distillation on the old
// heads. Gradient is returned over the full-width student logits.
struct LwfLoss {
  Scalar total = 0.0;
  Scalar ce_term = 0.0;
  Scalar kd_term = 0.0;
  Mat d_logits_full;
};
LwfLoss lwf_loss(const Mat& student_logits_full, const ActiveUnitMask& new_mask,
                 const IntVec& hard_labels, const ActiveUnitMask& old_mask,
                 const Mat& teacher_targets, const LwFConfig& cfg);

// Replay mixing: the current task carries 1/tasks_seen of the weight.
Scalar gr_mixing_ratio(int tasks_seen);
Scalar gr_mixed_loss(Scalar loss_current, Scalar loss_replay, Scalar ratio);

} // namespace tabcl

#endif
