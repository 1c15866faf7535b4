#ifndef TABCL_MODEL_MERGED_HPP
#define TABCL_MODEL_MERGED_HPP

#include "tabcl/model/mlp.hpp"
#include "tabcl/model/vae.hpp"

#include <map>
#include <optional>
#include <vector>

namespace tabcl {

struct MergedConfig {
  MLPConfig classifier;
  Index latent_dim = 100;
  // 0 replays in input space; k > 0 replays the output of hidden block k.
  int internal_replay_layer = 0;
  LatentPrior prior = LatentPrior::standard_normal;
  int n_modes = 0;
  bool gating = false;
  Scalar gate_fraction = 0.8; // fraction of decoder units kept per class
  FeatureKind recon_kind = FeatureKind::real;
  Scalar logvar_clamp = 10.0;

  void validate() const;
};

// Classifier and generator sharing one encoder: the classifier head, latent
// heads and decoder all hang off the trunk. The generative path treats the
// representation at internal_replay_layer as its data; blocks below that
// layer receive gradient only from the classification path and can be frozen
// after the first task.
class MergedGenerativeClassifier {
 public:
  MergedGenerativeClassifier() = default;
  MergedGenerativeClassifier(const MergedConfig& cfg, std::uint64_t init_seed);

  const MergedConfig& config() const { return cfg_; }
  ClassifierModel& classifier() { return classifier_; }
  const ClassifierModel& classifier() const { return classifier_; }
  Index latent_dim() const { return cfg_.latent_dim; }
  int internal_layer() const { return cfg_.internal_replay_layer; }
  Index rep_dim() const;

  // Representation the replay losses are computed against (eval mode).
  Mat internal_replay_targets(const Mat& x) const;

  // Full-width head logits from a level-L representation (eval mode).
  Mat logits_from_representation(const Mat& rep) const;

  // Decoder in eval mode; gate_classes (one per row) applies that class's
  // gating masks when gating is enabled.
  Mat decode(const Mat& z, const std::vector<int>* gate_classes = nullptr) const;

  // Per-class gating masks over decoder hidden units; fixed once drawn.
  void draw_gating_masks(int class_id, Scalar gate_fraction, Rng& rng);
  bool has_gating_masks(int class_id) const;
  const std::vector<Vec>& gating_masks(int class_id) const;
  const std::map<int, std::vector<Vec>>& gating_registry() const { return gating_masks_; }
  std::map<int, std::vector<Vec>>& gating_registry() { return gating_masks_; }

  MatRM& modes() { return modes_; }
  const MatRM& modes() const { return modes_; }

  void set_lower_frozen(bool frozen) { lower_frozen_ = frozen; }
  bool lower_frozen() const { return lower_frozen_; }

  std::vector<HiddenBlock>& decoder_blocks() { return decoder_; }
  const std::vector<HiddenBlock>& decoder_blocks() const { return decoder_; }

  std::vector<ParamBlob> blobs();
  void zero_grad();
  Index n_params() const;

  struct LossTerms {
    Scalar classification = 0.0;
    Scalar reconstruction = 0.0;
    Scalar kl = 0.0;
    Scalar total() const { return classification + reconstruction + kl; }
  };

  struct StepOptions {
    const ActiveUnitMask* mask = nullptr; // units the classification loss covers
    const IntVec* hard_labels = nullptr;  // exactly one of hard_labels /
    const Mat* soft_targets = nullptr;    // soft_targets (over mask units)
    Scalar distill_temperature = 2.0;
    bool input_is_representation = false; // true: input is already at level L
    const std::vector<int>* gate_classes = nullptr;
    bool conditional_kl = false; // use gate_classes' mixture modes in the KL
    Scalar loss_weight = 1.0;    // scales both the loss and the gradients
    Scalar generative_weight = 1.0;
    bool training = true;
    Rng* dropout_rng = nullptr;
  };

  // One forward/backward pass; gradients accumulate so several calls (current
  // batch + replay batch) can share a single optimizer step.
  LossTerms loss_backward(const Mat& input, const Mat& noise, const StepOptions& opts);

  // Eval-mode single-encoder-pass inspection: masked logits, reconstructed
  // features and latent statistics.
  struct ForwardView {
    Mat logits; // over mask units, mask order
    Mat reconstruction;
    Mat mu, logvar;
  };
  ForwardView forward_view(const Mat& x, const ActiveUnitMask& mask, const Mat& noise) const;

  // Latent draws + decoded representations for replay generation (eval mode).
  Mat sample_latent(Index n, Rng& rng, const std::vector<int>& classes) const;

 private:
  std::vector<HiddenBlock>& trunk() { return classifier_.blocks(); }
  const std::vector<HiddenBlock>& trunk() const { return classifier_.blocks(); }
  Mat apply_gating(Mat h, std::size_t block, const std::vector<int>& classes,
                   Mat* cache) const;

  MergedConfig cfg_;
  ClassifierModel classifier_;
  LinearLayer mu_head_, logvar_head_;
  std::vector<HiddenBlock> decoder_;
  LinearLayer recon_head_;
  MatRM modes_;
  MatRM grad_modes_;
  std::map<int, std::vector<Vec>> gating_masks_;
  bool lower_frozen_ = false;
};

// Spec-shaped wrappers.
inline Mat internal_replay_targets(const MergedGenerativeClassifier& mm, const Mat& x) {
  return mm.internal_replay_targets(x);
}
void draw_gating_masks(MergedGenerativeClassifier& mm, int class_id,
                       Scalar gate_fraction, std::uint64_t seed);

} // namespace tabcl

#endif
