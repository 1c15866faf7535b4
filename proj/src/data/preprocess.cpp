#include "tabcl/data/preprocess.hpp"

#include "tabcl/errors.hpp"

#include <cmath>

namespace tabcl {

VarianceFilter VarianceFilter::fit(const Mat& train_features, Scalar threshold) {
  if (train_features.rows() == 0)
    throw ConfigError("variance filter: empty training set");
  const Index n = train_features.rows();
  const RowVec mean = train_features.colwise().mean();
  const RowVec var =
      (train_features.rowwise() - mean).array().square().colwise().sum() /
      static_cast<Scalar>(n);

  VarianceFilter filter;
  filter.threshold = threshold;
  filter.kept_mask = (var.transpose().array() >= threshold);
  if (filter.kept_count() == 0)
    throw ConfigError("variance filter: threshold " + std::to_string(threshold) +
                      " drops every feature");
  return filter;
}

Mat VarianceFilter::apply(const Mat& features) const {
  if (features.cols() == kept_count()) return features; // already filtered
  if (features.cols() != original_dim())
    throw DimensionError("variance filter: expected " +
                         std::to_string(original_dim()) + " columns, got " +
                         std::to_string(features.cols()));
  Mat out(features.rows(), kept_count());
  Index j = 0;
  for (Index c = 0; c < features.cols(); ++c)
    if (kept_mask[c]) out.col(j++) = features.col(c);
  return out;
}

void IncrementalStandardizer::partial_update(const Mat& chunk) {
  if (chunk.rows() == 0) return;
  if (count_ == 0) {
    const Index n = chunk.rows();
    mean_ = chunk.colwise().mean();
    m2_ = (chunk.rowwise() - mean_.transpose()).array().square().colwise().sum();
    count_ = n;
    return;
  }
  if (chunk.cols() != mean_.size())
    throw DimensionError("standardizer: chunk has " + std::to_string(chunk.cols()) +
                         " columns, state has " + std::to_string(mean_.size()));
  const Scalar n_a = static_cast<Scalar>(count_);
  const Scalar n_b = static_cast<Scalar>(chunk.rows());
  const Vec mean_b = chunk.colwise().mean();
  const Vec m2_b =
      (chunk.rowwise() - mean_b.transpose()).array().square().colwise().sum();
  const Vec delta = mean_b - mean_;
  const Scalar n = n_a + n_b;
  mean_ += delta * (n_b / n);
  m2_ += m2_b + delta.array().square().matrix() * (n_a * n_b / n);
  count_ += chunk.rows();
}

Vec IncrementalStandardizer::running_var() const {
  if (count_ == 0) return Vec();
  return m2_ / static_cast<Scalar>(count_);
}

Mat IncrementalStandardizer::transform(const Mat& features) const {
  if (count_ == 0)
    throw ConfigError("standardizer: transform called before any update");
  if (features.cols() != mean_.size())
    throw DimensionError("standardizer: feature count mismatch in transform");
  const Vec scale = (running_var().array() + epsilon_).sqrt();
  Mat out = features.rowwise() - mean_.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

} // namespace tabcl
