#ifndef TABCL_MODEL_MLP_HPP
#define TABCL_MODEL_MLP_HPP

#include "tabcl/math.hpp"
#include "tabcl/model/layers.hpp"
#include "tabcl/model/optimizer.hpp"
#include "tabcl/rng.hpp"
#include "tabcl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tabcl {

struct MLPConfig {
  std::vector<Index> hidden_widths = {1024, 512, 256, 128};
  Scalar dropout_rate = 0.5;
  bool use_batch_norm = true;
  std::string activation = "relu";
  Index input_dim = 0;
  Index n_output_units = 0;

  void validate() const;
};

// Which output units the softmax may assign probability to.
struct ActiveUnitMask {
  std::vector<int> active; // ordered unit ids

  static ActiveUnitMask all(int n_units);
  Index size() const { return static_cast<Index>(active.size()); }
  bool contains(int unit) const;
  void validate(Index n_units) const;
};

// MLP classifier: shared trunk of hidden blocks plus an output layer whose
// rows partition per class. Caching forward/backward is used for training;
// the *_const paths evaluate without touching caches or running statistics.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(const MLPConfig& cfg, std::uint64_t init_seed);

  const MLPConfig& config() const { return cfg_; }
  Index input_dim() const { return cfg_.input_dim; }
  Index n_output_units() const { return out_.out_dim(); }

  Mat forward(const Mat& x, bool training, Rng* dropout_rng); // full-width logits
  void backward_from_logits(const Mat& d_logits);
  Mat infer_logits(const Mat& x) const;

  // Penultimate representation (trunk output) in eval mode; the feature map
  // used for exemplar herding and nearest-mean classification.
  Mat trunk_features(const Mat& x) const;
  // Representation after the first `n_blocks` hidden blocks, eval mode.
  Mat features_through(const Mat& x, int n_blocks) const;

  std::vector<ParamBlob> blobs();
  Index n_params() const;
  Index trunk_param_count() const;
  Index head_param_count() const { return out_.param_count(); }
  Vec flat_params() const;
  void set_flat_params(const Vec& theta);
  Vec flat_grads() const;
  void set_flat_grads(const Vec& g);
  void zero_grad();

  // Appends output units for newly added classes; the trunk is untouched and
  // existing unit parameters keep their flat-view positions.
  void add_output_units(int count, Rng& rng);

  std::vector<HiddenBlock>& blocks() { return blocks_; }
  const std::vector<HiddenBlock>& blocks() const { return blocks_; }
  LinearLayer& output_layer() { return out_; }
  const LinearLayer& output_layer() const { return out_; }

 private:
  MLPConfig cfg_;
  std::vector<HiddenBlock> blocks_;
  LinearLayer out_;
};

// Logits restricted to the mask's units, in mask order.
Mat forward_logits(ClassifierModel& m, const Mat& x, const ActiveUnitMask& mask,
                   bool training, Rng* dropout_rng = nullptr);
Mat infer_logits_masked(const ClassifierModel& m, const Mat& x, const ActiveUnitMask& mask);

// Mean cross-entropy over the mask's units with full-width logits in and
// full-width gradient out (zero at inactive units).
struct MaskedCeResult {
  Scalar loss = 0.0;
  Mat d_logits; // n x n_output_units
};
MaskedCeResult masked_cross_entropy_full(const Mat& full_logits,
                                         const ActiveUnitMask& mask,
                                         const IntVec& y_global);

// One optimizer update on a labeled batch. Throws NumericError on a
// non-finite loss.
Scalar train_step(ClassifierModel& m, const Mat& x, const IntVec& y,
                  const ActiveUnitMask& mask, Optimizer& opt, Rng* dropout_rng);

IntVec predict_masked(const ClassifierModel& m, const Mat& x, const ActiveUnitMask& mask);
Scalar accuracy(const IntVec& predicted, const IntVec& expected);

} // namespace tabcl

#endif
