#ifndef TABCL_MODEL_VAE_HPP
#define TABCL_MODEL_VAE_HPP

#include "tabcl/data/dataset.hpp"
#include "tabcl/model/layers.hpp"
#include "tabcl/rng.hpp"
#include "tabcl/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tabcl {

enum class LatentPrior { standard_normal, gaussian_mixture };

// ---- latent-space math shared by VAEModel and the merged classifier ----

struct LatentSample {
  Mat mu;         // n x latent
  Mat logvar;     // clamped
  Mat z;          // mu + exp(logvar/2) * noise
  Mat noise;
  Mat clamp_mask; // 1 where the pre-clamp logvar was inside the range
};

LatentSample reparameterize(const Mat& mu, const Mat& logvar_pre, const Mat& noise,
                            Scalar logvar_clamp);

struct KlGrad {
  Scalar kl = 0.0;
  Mat d_mu;      // explicit term (reparam path excluded)
  Mat d_logvar;  // explicit term, already clamp-masked by the caller
  Mat d_z;       // routed through the reparameterization by the caller
};

// Closed form against N(0, I); the MC variant evaluates log q - log p at the
// drawn z. For the mixture, `class_ids` selects one mode per row (conditional);
// otherwise the density mixes uniformly over `mix_modes` (default: all modes).
KlGrad kl_standard_normal(const LatentSample& s);
KlGrad kl_monte_carlo_mixture(const LatentSample& s, const MatRM& modes,
                              const std::vector<int>* class_ids,
                              const std::vector<int>* mix_modes, MatRM* d_modes);

struct ReconGrad {
  Scalar loss = 0.0;
  Mat d_out;
};

// Bernoulli cross-entropy on logits for boolean feature spaces, half squared
// error for real ones; summed over features, averaged over the batch.
ReconGrad reconstruction_loss(const Mat& decoder_out, const Mat& target, FeatureKind kind);

// Decoder output as features: sigmoid of logits for boolean spaces.
Mat decoder_output_to_features(const Mat& decoder_out, FeatureKind kind);

// ---- the standalone symmetric VAE used for generative replay ----

struct VAEConfig {
  std::vector<Index> encoder_widths = {1024, 512, 256, 128};
  Index latent_dim = 100;
  Index input_dim = 0;
  Scalar dropout_rate = 0.0;
  bool use_batch_norm = true;
  LatentPrior prior = LatentPrior::standard_normal;
  int n_modes = 0; // one per known class when the mixture prior is enabled
  FeatureKind recon_kind = FeatureKind::real;
  Scalar logvar_clamp = 10.0;

  void validate() const;
};

class VAEModel {
 public:
  VAEModel() = default;
  VAEModel(const VAEConfig& cfg, std::uint64_t init_seed);

  const VAEConfig& config() const { return cfg_; }
  Index latent_dim() const { return cfg_.latent_dim; }

  // Encoder in eval mode.
  void encode(const Mat& x, Mat& mu, Mat& logvar) const;
  // Decoder in eval mode, producing feature-space samples.
  Mat decode(const Mat& z) const;

  std::vector<ParamBlob> blobs();
  void zero_grad();
  Index n_params() const;
  Vec flat_params() const;
  void set_flat_params(const Vec& theta);

  MatRM& modes() { return modes_; }
  const MatRM& modes() const { return modes_; }

  struct LossTerms {
    Scalar reconstruction = 0.0;
    Scalar kl = 0.0;
    Scalar total() const { return reconstruction + kl; }
  };

  // Forward + backward for one batch; gradients are accumulated into the
  // blobs, scaled by loss_weight (the returned terms are scaled the same
  // way). `noise` must be n x latent; class_ids (mixture prior only)
  // condition the KL on one mode per row.
  LossTerms loss_backward(const Mat& x, const Mat& noise, bool training,
                          Rng* dropout_rng, const std::vector<int>* class_ids = nullptr,
                          const std::vector<int>* mix_modes = nullptr,
                          Scalar loss_weight = 1.0);

 private:
  VAEConfig cfg_;
  std::vector<HiddenBlock> encoder_;
  LinearLayer mu_head_, logvar_head_;
  std::vector<HiddenBlock> decoder_;
  LinearLayer recon_head_;
  MatRM modes_; // n_modes x latent
  MatRM grad_modes_;
};

// (reconstruction_term, kl_term) of one batch, evaluation mode, without
// disturbing previously accumulated gradients' callers (grads are zeroed).
VAEModel::LossTerms vae_loss(VAEModel& v, const Mat& x, const Mat& noise,
                             const std::vector<int>* class_ids = nullptr);

// n decoded samples from the prior (or from one class mode). Deterministic
// given the rng state.
Mat sample_generator(const VAEModel& v, Index n, Rng& rng,
                     std::optional<int> class_id = std::nullopt,
                     const std::vector<int>* known_modes = nullptr);

// Latent draws only (used to test conditional sampling).
Mat sample_latent(const VAEModel& v, Index n, Rng& rng,
                  std::optional<int> class_id = std::nullopt,
                  const std::vector<int>* known_modes = nullptr);

} // namespace tabcl

#endif
