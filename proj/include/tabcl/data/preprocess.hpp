#ifndef TABCL_DATA_PREPROCESS_HPP
#define TABCL_DATA_PREPROCESS_HPP

#include "tabcl/types.hpp"

#include <cstdint>

namespace tabcl {

// Drops features whose training-set (population) variance falls below a
// threshold. Applying a fitted filter to an already-filtered matrix is a
// no-op, so apply is idempotent.
struct VarianceFilter {
  Scalar threshold = 1e-3;
  BoolVec kept_mask;

  Index original_dim() const { return kept_mask.size(); }
  Index kept_count() const { return kept_mask.count(); }

  static VarianceFilter fit(const Mat& train_features, Scalar threshold = 1e-3);
  Mat apply(const Mat& features) const;
};

// Streaming mean/variance accumulator: chunks are merged with the
// count-weighted parallel update, so the final moments match a single pass
// over the concatenated data.
class IncrementalStandardizer {
 public:
  explicit IncrementalStandardizer(Scalar epsilon = 1e-8) : epsilon_(epsilon) {}

  void partial_update(const Mat& chunk);
  Mat transform(const Mat& features) const;

  long long count() const { return count_; }
  Scalar epsilon() const { return epsilon_; }
  const Vec& running_mean() const { return mean_; }
  Vec running_var() const; // population variance

 private:
  Vec mean_;
  Vec m2_; // sum of squared deviations from the running mean
  long long count_ = 0;
  Scalar epsilon_;
};

} // namespace tabcl

#endif
