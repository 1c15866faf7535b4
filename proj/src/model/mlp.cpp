#include "tabcl/model/mlp.hpp"

#include "tabcl/errors.hpp"

#include <algorithm>
#include <sstream>

namespace tabcl {

void MLPConfig::validate() const {
  for (const Index w : hidden_widths)
    if (w < 1) throw ConfigError("mlp: hidden widths must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("mlp: dropout_rate must be in [0,1)");
  if (activation != "relu")
    throw ConfigError("mlp: unsupported activation '" + activation + "'");
  if (input_dim < 1) throw ConfigError("mlp: input_dim must be >= 1");
  if (n_output_units < 1) throw ConfigError("mlp: n_output_units must be >= 1");
}

ActiveUnitMask ActiveUnitMask::all(int n_units) {
  ActiveUnitMask m;
  m.active.resize(static_cast<std::size_t>(n_units));
  for (int i = 0; i < n_units; ++i) m.active[static_cast<std::size_t>(i)] = i;
  return m;
}

bool ActiveUnitMask::contains(int unit) const {
  return std::find(active.begin(), active.end(), unit) != active.end();
}

void ActiveUnitMask::validate(Index n_units) const {
  if (active.empty()) throw DimensionError("active unit mask is empty");
  for (const int u : active)
    if (u < 0 || u >= n_units)
      throw DimensionError("mask references uninstantiated output unit " +
                           std::to_string(u));
}

ClassifierModel::ClassifierModel(const MLPConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(init_seed, "classifier_init"));
  Index in = cfg_.input_dim;
  for (const Index w : cfg_.hidden_widths) {
    HiddenBlock block;
    block.init(in, w, cfg_.use_batch_norm, cfg_.dropout_rate, rng);
    blocks_.push_back(std::move(block));
    in = w;
  }
  out_.init(in, cfg_.n_output_units, rng);
}

Mat ClassifierModel::forward(const Mat& x, bool training, Rng* dropout_rng) {
  Mat h = x;
  for (auto& block : blocks_) h = block.forward(h, training, dropout_rng);
  return out_.forward(h);
}

void ClassifierModel::backward_from_logits(const Mat& d_logits) {
  Mat d = out_.backward(d_logits);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = it->backward(d);
}

Mat ClassifierModel::infer_logits(const Mat& x) const {
  return out_.forward_const(trunk_features(x));
}

Mat ClassifierModel::trunk_features(const Mat& x) const {
  Mat h = x;
  for (const auto& block : blocks_) h = block.forward_const(h);
  return h;
}

Mat ClassifierModel::features_through(const Mat& x, int n_blocks) const {
  if (n_blocks < 0 || n_blocks > static_cast<int>(blocks_.size()))
    throw ConfigError("features_through: invalid block count");
  Mat h = x;
  for (int i = 0; i < n_blocks; ++i)
    h = blocks_[static_cast<std::size_t>(i)].forward_const(h);
  return h;
}

std::vector<ParamBlob> ClassifierModel::blobs() {
  std::vector<ParamBlob> out;
  for (auto& block : blocks_) block.collect_blobs(out);
  out_.collect_blobs(out);
  return out;
}

Index ClassifierModel::n_params() const {
  Index n = out_.param_count();
  for (const auto& block : blocks_) n += block.param_count();
  return n;
}

Index ClassifierModel::trunk_param_count() const {
  Index n = 0;
  for (const auto& block : blocks_) n += block.param_count();
  return n;
}

Vec ClassifierModel::flat_params() const {
  auto& self = const_cast<ClassifierModel&>(*this);
  Vec theta(n_params());
  Index at = 0;
  for (const auto& blob : self.blobs()) {
    theta.segment(at, blob.size) = Eigen::Map<const Vec>(blob.param, blob.size);
    at += blob.size;
  }
  return theta;
}

void ClassifierModel::set_flat_params(const Vec& theta) {
  if (theta.size() != n_params())
    throw DimensionError("set_flat_params: expected " + std::to_string(n_params()) +
                         " values, got " + std::to_string(theta.size()));
  Index at = 0;
  for (const auto& blob : blobs()) {
    Eigen::Map<Vec>(blob.param, blob.size) = theta.segment(at, blob.size);
    at += blob.size;
  }
}

Vec ClassifierModel::flat_grads() const {
  auto& self = const_cast<ClassifierModel&>(*this);
  Vec g(n_params());
  Index at = 0;
  for (const auto& blob : self.blobs()) {
    g.segment(at, blob.size) = Eigen::Map<const Vec>(blob.grad, blob.size);
    at += blob.size;
  }
  return g;
}

void ClassifierModel::set_flat_grads(const Vec& g) {
  if (g.size() != n_params())
    throw DimensionError("set_flat_grads: length mismatch");
  Index at = 0;
  for (const auto& blob : blobs()) {
    Eigen::Map<Vec>(blob.grad, blob.size) = g.segment(at, blob.size);
    at += blob.size;
  }
}

void ClassifierModel::zero_grad() {
  for (auto& block : blocks_) block.zero_grad();
  out_.zero_grad();
}

void ClassifierModel::add_output_units(int count, Rng& rng) {
  if (count < 1) throw ConfigError("add_output_units: count must be >= 1");
  const Index in = out_.in_dim();
  const Index old = out_.out_dim();
  out_.weight.conservativeResize(old + count, in);
  out_.bias.conservativeResize(old + count);
  out_.grad_weight.conservativeResize(old + count, in);
  out_.grad_bias.conservativeResize(old + count);
  const Scalar scale = std::sqrt(2.0 / static_cast<Scalar>(in));
  for (Index r = old; r < old + count; ++r) {
    for (Index c = 0; c < in; ++c) out_.weight(r, c) = scale * rng.normal();
    out_.bias[r] = 0.0;
    out_.grad_weight.row(r).setZero();
    out_.grad_bias[r] = 0.0;
  }
  cfg_.n_output_units = old + count;
}

Mat forward_logits(ClassifierModel& m, const Mat& x, const ActiveUnitMask& mask,
                   bool training, Rng* dropout_rng) {
  mask.validate(m.n_output_units());
  return select_columns(m.forward(x, training, dropout_rng), mask.active);
}

Mat infer_logits_masked(const ClassifierModel& m, const Mat& x, const ActiveUnitMask& mask) {
  mask.validate(m.n_output_units());
  return select_columns(m.infer_logits(x), mask.active);
}

MaskedCeResult masked_cross_entropy_full(const Mat& full_logits,
                                         const ActiveUnitMask& mask,
                                         const IntVec& y_global) {
  mask.validate(full_logits.cols());
  const Mat active_logits = select_columns(full_logits, mask.active);
  const IntVec y_local = local_labels(mask.active, y_global);
  const LossGrad ce = cross_entropy(active_logits, y_local);
  MaskedCeResult out;
  out.loss = ce.loss;
  out.d_logits = Mat::Zero(full_logits.rows(), full_logits.cols());
  for (std::size_t j = 0; j < mask.active.size(); ++j)
    out.d_logits.col(mask.active[j]) = ce.grad.col(static_cast<Index>(j));
  return out;
}

Scalar train_step(ClassifierModel& m, const Mat& x, const IntVec& y,
                  const ActiveUnitMask& mask, Optimizer& opt, Rng* dropout_rng) {
  m.zero_grad();
  const Mat logits = m.forward(x, true, dropout_rng);
  const MaskedCeResult ce = masked_cross_entropy_full(logits, mask, y);
  if (!std::isfinite(ce.loss)) {
    std::ostringstream msg;
    msg << "non-finite training loss (" << ce.loss << ") on batch of " << x.rows()
        << " samples; logit range [" << logits.minCoeff() << ", " << logits.maxCoeff()
        << "]";
    throw NumericError(msg.str());
  }
  m.backward_from_logits(ce.d_logits);
  opt.step(m.blobs());
  return ce.loss;
}

IntVec predict_masked(const ClassifierModel& m, const Mat& x, const ActiveUnitMask& mask) {
  const Mat logits = infer_logits_masked(m, x, mask);
  const IntVec local = argmax_rows(logits);
  IntVec global(local.size());
  for (Index i = 0; i < local.size(); ++i)
    global[i] = mask.active[static_cast<std::size_t>(local[i])];
  return global;
}

Scalar accuracy(const IntVec& predicted, const IntVec& expected) {
  if (predicted.size() != expected.size())
    throw DimensionError("accuracy: size mismatch");
  if (predicted.size() == 0) return 0.0;
  Index hits = 0;
  for (Index i = 0; i < predicted.size(); ++i)
    if (predicted[i] == expected[i]) ++hits;
  return static_cast<Scalar>(hits) / static_cast<Scalar>(predicted.size());
}

} // namespace tabcl
