#ifndef TABCL_MODEL_OPTIMIZER_HPP
#define TABCL_MODEL_OPTIMIZER_HPP

#include "tabcl/model/layers.hpp"
#include "tabcl/types.hpp"

#include <string>
#include <vector>

namespace tabcl {

struct OptimizerSpec {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  Scalar learning_rate = 0.01;
  Scalar momentum = 0.9;
  Scalar weight_decay = 0.0;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar adam_eps = 1e-8;

  void validate() const;
  static OptimizerSpec sgd(Scalar lr, Scalar momentum = 0.9, Scalar weight_decay = 0.0);
  static OptimizerSpec adam(Scalar lr, Scalar weight_decay = 0.0);
};

std::string to_string(OptimizerSpec::Kind k);
OptimizerSpec::Kind optimizer_kind_from_string(const std::string& s);

// Applies SGD-with-momentum or Adam updates to parameter blobs. Slot vectors
// grow lazily (preserving their prefix) when a blob gains elements, e.g.
// after new output units are added.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerSpec& spec) : spec_(spec) { spec_.validate(); }

  const OptimizerSpec& spec() const { return spec_; }
  long long step_count() const { return step_count_; }

  void step(const std::vector<ParamBlob>& blobs);

  // Checkpoint access.
  const std::vector<Vec>& slot(int which) const { return which == 0 ? slot0_ : slot1_; }
  void restore(std::vector<Vec> slot0, std::vector<Vec> slot1, long long steps);

 private:
  void ensure_slot(std::vector<Vec>& slots, std::size_t i, Index size);

  OptimizerSpec spec_;
  std::vector<Vec> slot0_; // sgd: velocity; adam: first moment
  std::vector<Vec> slot1_; // adam: second moment
  long long step_count_ = 0;
};

} // namespace tabcl

#endif
