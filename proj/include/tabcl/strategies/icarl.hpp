#ifndef TABCL_STRATEGIES_ICARL_HPP
#define TABCL_STRATEGIES_ICARL_HPP

#include "tabcl/data/run_data.hpp"
#include "tabcl/model/mlp.hpp"

#include <map>
#include <vector>

namespace tabcl {

// Greedy herding order over feature rows: each pick keeps the running
// exemplar mean closest to the full mean. Returns min(budget, n) distinct
// row positions in selection order.
std::vector<Index> herding_order(const Mat& phi, Index budget);

// Exemplar sets keyed by class id; each list is a herding-ordered prefix of
// dataset row indices, so shrinking a budget keeps the best-first items.
struct ExemplarSets {
  std::map<int, IndexList> sets;
  Index capacity = 2000;

  Index per_class_budget(int classes_seen) const {
    if (classes_seen < 1) throw ConfigError("exemplars: classes_seen must be >= 1");
    return capacity / classes_seen;
  }
  Index total() const;
  IndexList all() const;
};

// Herding selection of up to budget_m samples of one class, using the
// model's penultimate-layer features (recomputed, never cached).
IndexList icarl_construct_exemplars(const ClassifierModel& model, const RunData& data,
                                    const IndexList& class_rows, Index budget_m);

// Keeps each set's herding prefix.
void icarl_reduce_exemplars(ExemplarSets& sets, Index new_budget);

// Nearest class feature-mean over the stored exemplars.
IntVec icarl_classify(const ClassifierModel& model, const RunData& data, const Mat& x,
                      const ExemplarSets& sets);

// CE restricted to new-class units (rows labeled with new classes) plus
// distillation against the teacher on the old-class units (all rows).
struct IcarlLoss {
  Scalar total = 0.0;
  Scalar ce_term = 0.0;
  Scalar kd_term = 0.0;
  Mat d_logits_full;
};
IcarlLoss icarl_loss(const Mat& student_logits_full, const ActiveUnitMask& new_mask,
                     const IntVec& hard_labels, const ActiveUnitMask& old_mask,
                     const Mat* teacher_targets, Scalar temperature);

} // namespace tabcl

#endif
