#include "tabcl/strategies/icarl.hpp"

#include "tabcl/math.hpp"

#include <limits>

namespace tabcl {

std::vector<Index> herding_order(const Mat& phi, Index budget) {
  const Index n = phi.rows();
  if (n == 0) throw ConfigError("herding: empty class");
  const Index take = std::min<Index>(budget, n);
  const RowVec mean = phi.colwise().mean();

  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(take));
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  RowVec running_sum = RowVec::Zero(phi.cols());
  for (Index k = 1; k <= take; ++k) {
    Index best = -1;
    Scalar best_dist = std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const Scalar dist =
          (mean - (running_sum + phi.row(i)) / static_cast<Scalar>(k)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    running_sum += phi.row(best);
    order.push_back(best);
  }
  return order;
}

Index ExemplarSets::total() const {
  Index n = 0;
  for (const auto& [cls, rows] : sets) n += static_cast<Index>(rows.size());
  return n;
}

IndexList ExemplarSets::all() const {
  IndexList out;
  for (const auto& [cls, rows] : sets) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

IndexList icarl_construct_exemplars(const ClassifierModel& model, const RunData& data,
                                    const IndexList& class_rows, Index budget_m) {
  if (class_rows.empty()) throw ConfigError("icarl: empty class sample set");
  if (budget_m < 1) throw ConfigError("icarl: budget must be >= 1");
  const Mat phi = model.trunk_features(data.features(class_rows));
  IndexList out;
  for (const Index pos : herding_order(phi, budget_m))
    out.push_back(class_rows[static_cast<std::size_t>(pos)]);
  return out;
}

void icarl_reduce_exemplars(ExemplarSets& sets, Index new_budget) {
  if (new_budget < 1) throw ConfigError("icarl: budget must be >= 1");
  for (auto& [cls, rows] : sets.sets)
    if (static_cast<Index>(rows.size()) > new_budget)
      rows.resize(static_cast<std::size_t>(new_budget));
}

IntVec icarl_classify(const ClassifierModel& model, const RunData& data, const Mat& x,
                      const ExemplarSets& sets) {
  if (sets.sets.empty()) throw ConfigError("icarl classify: no exemplar sets");
  std::vector<int> classes;
  Mat means(static_cast<Index>(sets.sets.size()), model.trunk_features(x.topRows(0)).cols());
  Index row = 0;
  for (const auto& [cls, rows] : sets.sets) {
    if (rows.empty()) throw ConfigError("icarl classify: empty exemplar set for class " +
                                        std::to_string(cls));
    const Mat phi = model.trunk_features(data.features(rows));
    means.row(row++) = phi.colwise().mean();
    classes.push_back(cls);
  }
  const Mat phi_x = model.trunk_features(x);
  IntVec out(phi_x.rows());
  for (Index i = 0; i < phi_x.rows(); ++i) {
    Index best = 0;
    Scalar best_dist = std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < means.rows(); ++c) {
      const Scalar dist = (phi_x.row(i) - means.row(c)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    out[i] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

IcarlLoss icarl_loss(const Mat& student_logits_full, const ActiveUnitMask& new_mask,
                     const IntVec& hard_labels, const ActiveUnitMask& old_mask,
                     const Mat* teacher_targets, Scalar temperature) {
  IcarlLoss out;
  out.d_logits_full = Mat::Zero(student_logits_full.rows(), student_logits_full.cols());

  // CE over the new-class units, on the rows whose labels are new classes.
  IndexList new_rows;
  for (Index i = 0; i < hard_labels.size(); ++i)
    if (new_mask.contains(hard_labels[i])) new_rows.push_back(i);
  if (!new_rows.empty()) {
    Mat logits_new(static_cast<Index>(new_rows.size()), student_logits_full.cols());
    IntVec y_new(static_cast<Index>(new_rows.size()));
    for (std::size_t r = 0; r < new_rows.size(); ++r) {
      logits_new.row(static_cast<Index>(r)) = student_logits_full.row(new_rows[r]);
      y_new[static_cast<Index>(r)] = hard_labels[new_rows[r]];
    }
    const MaskedCeResult ce = masked_cross_entropy_full(logits_new, new_mask, y_new);
    out.ce_term = ce.loss;
    for (std::size_t r = 0; r < new_rows.size(); ++r)
      out.d_logits_full.row(new_rows[r]) += ce.d_logits.row(static_cast<Index>(r));
  }

  // Distillation on the old-class units, over every row.
  if (teacher_targets && !old_mask.active.empty()) {
    old_mask.validate(student_logits_full.cols());
    const Mat student_old = select_columns(student_logits_full, old_mask.active);
    const LossGrad kd = distillation_kl(student_old, *teacher_targets, temperature);
    out.kd_term = kd.loss;
    for (std::size_t j = 0; j < old_mask.active.size(); ++j)
      out.d_logits_full.col(old_mask.active[j]) += kd.grad.col(static_cast<Index>(j));
  }
  out.total = out.ce_term + out.kd_term;
  return out;
}

} // namespace tabcl
