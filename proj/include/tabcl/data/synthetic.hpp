#ifndef TABCL_DATA_SYNTHETIC_HPP
#define TABCL_DATA_SYNTHETIC_HPP

#include "tabcl/data/dataset.hpp"

#include <cstdint>
#include <map>

namespace tabcl {

// Desk-scale stand-in for a naturally drifting tabular stream: Gaussian class
// clusters whose centroids translate a fixed distance each month.
struct SyntheticStreamConfig {
  int n_classes = 2;
  int n_features = 10;
  int samples_per_class_per_month = 50;
  int n_months = 1;
  Scalar drift_magnitude = 0.0;        // per-month centroid displacement
  std::map<int, int> class_birth_month; // class -> first month it appears
  std::uint64_t seed = 0;

  Scalar class_separation = 3.0; // expected distance scale between base centroids
  Scalar noise_stddev = 1.0;

  void validate() const;
};

LabeledDataset generate_synthetic_stream(const SyntheticStreamConfig& cfg);

// Samples the generator will emit for (class, month); the generator's own
// bookkeeping, usable as an oracle for scenario builders.
Index synthetic_samples_for(const SyntheticStreamConfig& cfg, int class_id, int month);

} // namespace tabcl

#endif
