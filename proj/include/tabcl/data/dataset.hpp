#ifndef TABCL_DATA_DATASET_HPP
#define TABCL_DATA_DATASET_HPP

#include "tabcl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tabcl {

enum class FeatureKind { boolean, real };

// A dense tabular classification dataset. Every scenario slices into one of
// these; `month` is the optional stream bucket used by domain-incremental
// splits.
struct LabeledDataset {
  Mat features;                         // n_samples x n_features
  IntVec labels;                        // class id per sample, in [0, n_classes)
  std::vector<int> month;               // empty, or one 0-based bucket per sample
  std::vector<std::string> class_names; // ordered, size == n_classes
  FeatureKind feature_kind = FeatureKind::real;

  Index n_samples() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }
  bool has_month() const { return !month.empty(); }

  // Count of samples per class, indexed by class id.
  std::vector<Index> class_counts() const;

  // Throws SchemaError/DimensionError when an invariant is violated.
  void validate() const;
};

enum class TabularFormat { csv, jsonlines, binary_cache };

// Loads a dataset from CSV (header f0..f{d-1},label[,month]) or JSON-lines
// ({"features": [...], "label": int|string, "month": int?}). A binary cache
// keyed by the source file's content hash is written next to the source and
// reused on subsequent loads; format binary_cache reads such a file directly.
LabeledDataset load_tabular(const std::string& path, TabularFormat format);

// Cache file maintenance, exposed for the loader tests.
std::string cache_path_for(const std::string& source_path);
void write_binary_cache(const LabeledDataset& ds, const std::string& path,
                        std::uint64_t source_hash);
LabeledDataset read_binary_cache(const std::string& path,
                                 std::uint64_t* source_hash_out = nullptr);

std::uint64_t fnv1a_file_hash(const std::string& path);
std::uint64_t fnv1a_hash(const void* data, std::size_t size);

FeatureKind detect_feature_kind(const Mat& features);

} // namespace tabcl

#endif
