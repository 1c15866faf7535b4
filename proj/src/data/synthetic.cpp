#include "tabcl/data/synthetic.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/rng.hpp"

#include <cmath>
#include <vector>

namespace tabcl {

void SyntheticStreamConfig::validate() const {
  if (n_classes < 1) throw ConfigError("synthetic: n_classes must be >= 1");
  if (n_features < 1) throw ConfigError("synthetic: n_features must be >= 1");
  if (samples_per_class_per_month < 1)
    throw ConfigError("synthetic: samples_per_class_per_month must be >= 1");
  if (n_months < 1) throw ConfigError("synthetic: n_months must be >= 1");
  if (drift_magnitude < 0) throw ConfigError("synthetic: drift_magnitude must be >= 0");
  if (noise_stddev <= 0) throw ConfigError("synthetic: noise_stddev must be > 0");
  for (const auto& [cls, birth] : class_birth_month) {
    if (cls < 0 || cls >= n_classes)
      throw ConfigError("synthetic: birth month for unknown class " + std::to_string(cls));
    if (birth < 0 || birth >= n_months)
      throw ConfigError("synthetic: birth month out of range for class " + std::to_string(cls));
  }
  bool any_alive_at_start = false;
  for (int c = 0; c < n_classes; ++c) {
    auto it = class_birth_month.find(c);
    if (it == class_birth_month.end() || it->second == 0) any_alive_at_start = true;
  }
  if (!any_alive_at_start) throw ConfigError("synthetic: no class alive in month 0");
}

Index synthetic_samples_for(const SyntheticStreamConfig& cfg, int class_id, int month) {
  auto it = cfg.class_birth_month.find(class_id);
  const int birth = it == cfg.class_birth_month.end() ? 0 : it->second;
  return month >= birth ? cfg.samples_per_class_per_month : 0;
}

LabeledDataset generate_synthetic_stream(const SyntheticStreamConfig& cfg) {
  cfg.validate();
  Rng geometry_rng(derive_seed(cfg.seed, "geometry"));
  const Index d = cfg.n_features;

  // Base centroids scaled so pairwise distances sit near class_separation;
  // drift directions are unit vectors fixed per class.
  const Scalar centroid_scale =
      cfg.class_separation / std::sqrt(2.0 * static_cast<Scalar>(d));
  std::vector<Vec> base(static_cast<std::size_t>(cfg.n_classes));
  std::vector<Vec> drift_dir(static_cast<std::size_t>(cfg.n_classes));
  for (int c = 0; c < cfg.n_classes; ++c) {
    base[static_cast<std::size_t>(c)] = geometry_rng.normal_vec(d) * centroid_scale;
    Vec dir = geometry_rng.normal_vec(d);
    const Scalar norm = dir.norm();
    drift_dir[static_cast<std::size_t>(c)] = norm > 0 ? Vec(dir / norm) : Vec::Unit(d, 0);
  }

  Index total = 0;
  for (int m = 0; m < cfg.n_months; ++m)
    for (int c = 0; c < cfg.n_classes; ++c) total += synthetic_samples_for(cfg, c, m);

  LabeledDataset ds;
  ds.features.resize(total, d);
  ds.labels.resize(total);
  ds.month.resize(static_cast<std::size_t>(total));
  ds.feature_kind = FeatureKind::real;
  for (int c = 0; c < cfg.n_classes; ++c)
    ds.class_names.push_back("c" + std::to_string(c));

  Rng sample_rng(derive_seed(cfg.seed, "samples"));
  Index row = 0;
  for (int m = 0; m < cfg.n_months; ++m) {
    for (int c = 0; c < cfg.n_classes; ++c) {
      const Index n = synthetic_samples_for(cfg, c, m);
      if (n == 0) continue;
      const Vec centroid = base[static_cast<std::size_t>(c)] +
                           cfg.drift_magnitude * static_cast<Scalar>(m) *
                               drift_dir[static_cast<std::size_t>(c)];
      for (Index i = 0; i < n; ++i, ++row) {
        ds.features.row(row) =
            (centroid + cfg.noise_stddev * sample_rng.normal_vec(d)).transpose();
        ds.labels[row] = c;
        ds.month[static_cast<std::size_t>(row)] = m;
      }
    }
  }
  ds.validate();
  return ds;
}

} // namespace tabcl
