#ifndef TABCL_MATH_HPP
#define TABCL_MATH_HPP

#include "tabcl/errors.hpp"
#include "tabcl/types.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace tabcl {

template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  const S m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// Row-wise stable log-softmax.
inline Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar lse = logsumexp(logits.row(i).transpose());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

inline Mat softmax_rows(const Mat& logits) {
  return log_softmax_rows(logits).array().exp();
}

inline Mat select_columns(const Mat& m, const std::vector<int>& cols) {
  Mat out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

// Softmax restricted to the given units; inactive units get exactly 0.
// `active` lists global unit ids; output is full width.
inline Mat masked_probabilities(const Mat& logits, const std::vector<int>& active) {
  if (active.empty()) throw DimensionError("masked_probabilities: empty active set");
  const Mat probs = softmax_rows(select_columns(logits, active));
  Mat out = Mat::Zero(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < active.size(); ++j)
    out.col(active[j]) = probs.col(static_cast<Index>(j));
  return out;
}

// Positions of global labels inside the active-unit ordering.
inline IntVec local_labels(const std::vector<int>& active, const IntVec& y) {
  IntVec out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    int pos = -1;
    for (std::size_t j = 0; j < active.size(); ++j)
      if (active[j] == y[i]) { pos = static_cast<int>(j); break; }
    if (pos < 0) throw DimensionError("label outside active unit set");
    out[i] = pos;
  }
  return out;
}

struct LossGrad {
  Scalar loss = 0.0;
  Mat grad; // d(loss)/d(logits), same shape as the logits passed in
};

// Mean cross-entropy over rows; labels are positions into the columns.
inline LossGrad cross_entropy(const Mat& logits, const IntVec& labels) {
  const Index n = logits.rows();
  if (labels.size() != n) throw DimensionError("cross_entropy: label count mismatch");
  const Mat logp = log_softmax_rows(logits);
  Scalar loss = 0.0;
  Mat grad = logp.array().exp();
  for (Index i = 0; i < n; ++i) {
    loss -= logp(i, labels[i]);
    grad(i, labels[i]) -= 1.0;
  }
  const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
  return {loss * inv_n, grad * inv_n};
}

// Mean KL(target || softmax(logits / T)) over rows. Targets are fixed
// probability rows (typically a teacher's temperature-scaled softmax).
inline LossGrad distillation_kl(const Mat& logits, const Mat& targets, Scalar temperature) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw DimensionError("distillation_kl: shape mismatch");
  const Index n = logits.rows();
  const Mat logp = log_softmax_rows(logits / temperature);
  Scalar loss = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < logits.cols(); ++j) {
      const Scalar t = targets(i, j);
      if (t > 0.0) loss += t * (std::log(t) - logp(i, j));
    }
  const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
  Mat grad = (logp.array().exp().matrix() - targets) * (inv_n / temperature);
  return {loss * inv_n, grad};
}

inline Scalar gaussian_log_density(const Vec& z, const Vec& mean) {
  static constexpr Scalar log2pi = 1.8378770664093454836;
  return -0.5 * (static_cast<Scalar>(z.size()) * log2pi + (z - mean).squaredNorm());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline IntVec argmax_rows(const Mat& m) {
  IntVec out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    Index j;
    m.row(i).maxCoeff(&j);
    out[i] = static_cast<int>(j);
  }
  return out;
}

} // namespace tabcl

#endif
