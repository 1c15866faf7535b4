#include "tabcl/model/optimizer.hpp"

#include "tabcl/errors.hpp"

#include <cmath>

namespace tabcl {

void OptimizerSpec::validate() const {
  if (learning_rate < 0) throw ConfigError("optimizer: learning_rate must be >= 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("optimizer: momentum must be in [0,1)");
  if (weight_decay < 0) throw ConfigError("optimizer: weight_decay must be >= 0");
}

OptimizerSpec OptimizerSpec::sgd(Scalar lr, Scalar momentum, Scalar weight_decay) {
  OptimizerSpec s;
  s.kind = Kind::sgd;
  s.learning_rate = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

OptimizerSpec OptimizerSpec::adam(Scalar lr, Scalar weight_decay) {
  OptimizerSpec s;
  s.kind = Kind::adam;
  s.learning_rate = lr;
  s.weight_decay = weight_decay;
  return s;
}

std::string to_string(OptimizerSpec::Kind k) {
  return k == OptimizerSpec::Kind::sgd ? "sgd" : "adam";
}

OptimizerSpec::Kind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerSpec::Kind::sgd;
  if (s == "adam") return OptimizerSpec::Kind::adam;
  throw ConfigError("unknown optimizer kind '" + s + "'");
}

void Optimizer::ensure_slot(std::vector<Vec>& slots, std::size_t i, Index size) {
  if (slots.size() <= i) slots.resize(i + 1);
  Vec& s = slots[i];
  if (s.size() < size) {
    const Index old = s.size();
    s.conservativeResize(size);
    s.tail(size - old).setZero();
  }
}

void Optimizer::step(const std::vector<ParamBlob>& blobs) {
  ++step_count_;
  const Scalar lr = spec_.learning_rate;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const ParamBlob& blob = blobs[i];
    if (blob.frozen) continue;
    Eigen::Map<Vec> theta(blob.param, blob.size);
    Eigen::Map<const Vec> grad(blob.grad, blob.size);
    Vec g = grad;
    if (spec_.weight_decay > 0) g += spec_.weight_decay * theta;

    if (spec_.kind == OptimizerSpec::Kind::sgd) {
      ensure_slot(slot0_, i, blob.size);
      Vec& v = slot0_[i];
      v.head(blob.size) = spec_.momentum * v.head(blob.size) + g;
      theta -= lr * v.head(blob.size);
    } else {
      ensure_slot(slot0_, i, blob.size);
      ensure_slot(slot1_, i, blob.size);
      Vec& m = slot0_[i];
      Vec& v = slot1_[i];
      m.head(blob.size) = spec_.beta1 * m.head(blob.size) + (1.0 - spec_.beta1) * g;
      v.head(blob.size) =
          spec_.beta2 * v.head(blob.size) + (1.0 - spec_.beta2) * g.array().square().matrix();
      const Scalar bc1 = 1.0 - std::pow(spec_.beta1, static_cast<Scalar>(step_count_));
      const Scalar bc2 = 1.0 - std::pow(spec_.beta2, static_cast<Scalar>(step_count_));
      theta -= (lr * (m.head(blob.size) / bc1).array() /
                ((v.head(blob.size) / bc2).array().sqrt() + spec_.adam_eps))
                   .matrix();
    }
  }
}

void Optimizer::restore(std::vector<Vec> slot0, std::vector<Vec> slot1, long long steps) {
  slot0_ = std::move(slot0);
  slot1_ = std::move(slot1);
  step_count_ = steps;
}

} // namespace tabcl
