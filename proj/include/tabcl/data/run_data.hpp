#ifndef TABCL_DATA_RUN_DATA_HPP
#define TABCL_DATA_RUN_DATA_HPP

#include "tabcl/data/dataset.hpp"
#include "tabcl/data/preprocess.hpp"
#include "tabcl/errors.hpp"

#include <optional>

namespace tabcl {

// Preprocessed view over a dataset. Replay state everywhere holds raw row
// indices; features materialize through the current pipeline state, so a
// standardizer updated month by month transforms past samples with the
// latest statistics.
class RunData {
 public:
  explicit RunData(const LabeledDataset& ds) : ds_(&ds) {}

  const LabeledDataset& dataset() const { return *ds_; }

  void set_variance_filter(VarianceFilter filter) { filter_ = std::move(filter); }
  const std::optional<VarianceFilter>& variance_filter() const { return filter_; }

  void enable_standardizer(Scalar epsilon = 1e-8) { scaler_.emplace(epsilon); }
  bool has_standardizer() const { return scaler_.has_value(); }
  IncrementalStandardizer& standardizer() {
    if (!scaler_) throw ConfigError("run data: standardizer not enabled");
    return *scaler_;
  }

  Index input_dim() const {
    if (filter_) return filter_->kept_count();
    return ds_->n_features();
  }

  Mat raw_rows(const IndexList& rows) const {
    Mat x(static_cast<Index>(rows.size()), ds_->n_features());
    for (std::size_t i = 0; i < rows.size(); ++i)
      x.row(static_cast<Index>(i)) = ds_->features.row(rows[i]);
    return x;
  }

  Mat transform(const Mat& raw) const {
    Mat x = filter_ ? filter_->apply(raw) : raw;
    if (scaler_ && scaler_->count() > 0) x = scaler_->transform(x);
    return x;
  }

  Mat features(const IndexList& rows) const { return transform(raw_rows(rows)); }

  IntVec labels(const IndexList& rows) const {
    IntVec y(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y[static_cast<Index>(i)] = ds_->labels[rows[i]];
    return y;
  }

 private:
  const LabeledDataset* ds_;
  std::optional<VarianceFilter> filter_;
  std::optional<IncrementalStandardizer> scaler_;
};

} // namespace tabcl

#endif
