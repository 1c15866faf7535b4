#include "tabcl/model/merged.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <cmath>

namespace tabcl {

void MergedConfig::validate() const {
  classifier.validate();
  if (latent_dim < 1) throw ConfigError("merged: latent_dim must be >= 1");
  const int n_blocks = static_cast<int>(classifier.hidden_widths.size());
  if (internal_replay_layer < 0 || internal_replay_layer > n_blocks)
    throw ConfigError("merged: internal_replay_layer must be in [0, " +
                      std::to_string(n_blocks) + "]");
  if (prior == LatentPrior::gaussian_mixture && n_modes < 1)
    throw ConfigError("merged: mixture prior requires n_modes >= 1");
  if (gating && (gate_fraction <= 0.0 || gate_fraction > 1.0))
    throw ConfigError("merged: gate_fraction must be in (0, 1]");
}

MergedGenerativeClassifier::MergedGenerativeClassifier(const MergedConfig& cfg,
                                                       std::uint64_t init_seed)
    : cfg_(cfg), classifier_(cfg.classifier, init_seed) {
  cfg_.validate();
  Rng rng(derive_seed(init_seed, "merged_init"));
  const Index trunk_out = cfg_.classifier.hidden_widths.empty()
                              ? cfg_.classifier.input_dim
                              : cfg_.classifier.hidden_widths.back();
  mu_head_.init(trunk_out, cfg_.latent_dim, rng);
  logvar_head_.init(trunk_out, cfg_.latent_dim, rng);

  const int L = cfg_.internal_replay_layer;
  Index dec_in = cfg_.latent_dim;
  const auto& widths = cfg_.classifier.hidden_widths;
  for (int i = static_cast<int>(widths.size()) - 1; i >= L; --i) {
    HiddenBlock block;
    block.init(dec_in, widths[static_cast<std::size_t>(i)], cfg_.classifier.use_batch_norm,
               cfg_.classifier.dropout_rate, rng);
    decoder_.push_back(std::move(block));
    dec_in = widths[static_cast<std::size_t>(i)];
  }
  recon_head_.init(dec_in, rep_dim(), rng);

  if (cfg_.prior == LatentPrior::gaussian_mixture) {
    modes_.resize(cfg_.n_modes, cfg_.latent_dim);
    for (Index r = 0; r < modes_.rows(); ++r)
      for (Index c = 0; c < modes_.cols(); ++c) modes_(r, c) = 0.1 * rng.normal();
    grad_modes_ = MatRM::Zero(modes_.rows(), modes_.cols());
  }
}

Index MergedGenerativeClassifier::rep_dim() const {
  const int L = cfg_.internal_replay_layer;
  if (L == 0) return cfg_.classifier.input_dim;
  return cfg_.classifier.hidden_widths[static_cast<std::size_t>(L - 1)];
}

Mat MergedGenerativeClassifier::internal_replay_targets(const Mat& x) const {
  return classifier_.features_through(x, cfg_.internal_replay_layer);
}

Mat MergedGenerativeClassifier::logits_from_representation(const Mat& rep) const {
  if (rep.cols() != rep_dim())
    throw DimensionError("logits_from_representation: dim mismatch");
  Mat h = rep;
  const auto& blocks = trunk();
  for (int b = cfg_.internal_replay_layer; b < static_cast<int>(blocks.size()); ++b)
    h = blocks[static_cast<std::size_t>(b)].forward_const(h);
  return classifier_.output_layer().forward_const(h);
}

Mat MergedGenerativeClassifier::apply_gating(Mat h, std::size_t block,
                                             const std::vector<int>& classes,
                                             Mat* cache) const {
  if (static_cast<Index>(classes.size()) != h.rows())
    throw DimensionError("gating: one class per row required");
  Mat gate(h.rows(), h.cols());
  for (Index i = 0; i < h.rows(); ++i) {
    const auto it = gating_masks_.find(classes[static_cast<std::size_t>(i)]);
    if (it == gating_masks_.end())
      throw ConfigError("gating mask missing for class " +
                        std::to_string(classes[static_cast<std::size_t>(i)]));
    gate.row(i) = it->second[block].transpose();
  }
  if (cache) *cache = gate;
  return h.array() * gate.array();
}

Mat MergedGenerativeClassifier::decode(const Mat& z,
                                       const std::vector<int>* gate_classes) const {
  Mat h = z;
  for (std::size_t b = 0; b < decoder_.size(); ++b) {
    h = decoder_[b].forward_const(h);
    if (cfg_.gating && gate_classes) h = apply_gating(h, b, *gate_classes, nullptr);
  }
  return recon_head_.forward_const(h);
}

void MergedGenerativeClassifier::draw_gating_masks(int class_id, Scalar gate_fraction,
                                                   Rng& rng) {
  if (gate_fraction <= 0.0 || gate_fraction > 1.0)
    throw ConfigError("gating: gate_fraction must be in (0, 1]");
  if (gating_masks_.count(class_id))
    throw ConfigError("gating masks for class " + std::to_string(class_id) +
                      " were already drawn");
  std::vector<Vec> masks;
  for (const auto& block : decoder_) {
    const Index width = block.out_dim();
    const Index keep = static_cast<Index>(
        std::ceil(gate_fraction * static_cast<Scalar>(width)));
    Vec mask = Vec::Zero(width);
    for (const std::size_t pos : rng.sample_without_replacement(
             static_cast<std::size_t>(width), static_cast<std::size_t>(keep)))
      mask[static_cast<Index>(pos)] = 1.0;
    masks.push_back(std::move(mask));
  }
  gating_masks_.emplace(class_id, std::move(masks));
}

bool MergedGenerativeClassifier::has_gating_masks(int class_id) const {
  return gating_masks_.count(class_id) > 0;
}

const std::vector<Vec>& MergedGenerativeClassifier::gating_masks(int class_id) const {
  const auto it = gating_masks_.find(class_id);
  if (it == gating_masks_.end())
    throw ConfigError("no gating masks drawn for class " + std::to_string(class_id));
  return it->second;
}

std::vector<ParamBlob> MergedGenerativeClassifier::blobs() {
  std::vector<ParamBlob> out = classifier_.blobs();
  if (lower_frozen_) {
    // Lower-trunk blobs come first in the classifier's enumeration; marking
    // them frozen keeps the blob positions (and optimizer slots) stable.
    std::size_t frozen_blobs = 0;
    for (int b = 0; b < cfg_.internal_replay_layer; ++b) {
      frozen_blobs += 2; // linear weight + bias
      if (cfg_.classifier.use_batch_norm) frozen_blobs += 2;
    }
    for (std::size_t i = 0; i < frozen_blobs && i < out.size(); ++i)
      out[i].frozen = true;
  }
  mu_head_.collect_blobs(out);
  logvar_head_.collect_blobs(out);
  for (auto& block : decoder_) block.collect_blobs(out);
  recon_head_.collect_blobs(out);
  if (modes_.size() > 0) out.push_back({modes_.data(), grad_modes_.data(), modes_.size()});
  return out;
}

void MergedGenerativeClassifier::zero_grad() {
  classifier_.zero_grad();
  mu_head_.zero_grad();
  logvar_head_.zero_grad();
  for (auto& block : decoder_) block.zero_grad();
  recon_head_.zero_grad();
  if (grad_modes_.size() > 0) grad_modes_.setZero();
}

Index MergedGenerativeClassifier::n_params() const {
  auto& self = const_cast<MergedGenerativeClassifier&>(*this);
  Index n = 0;
  for (const auto& blob : self.blobs()) n += blob.size;
  return n;
}

MergedGenerativeClassifier::LossTerms MergedGenerativeClassifier::loss_backward(
    const Mat& input, const Mat& noise, const StepOptions& opts) {
  if ((opts.hard_labels == nullptr) == (opts.soft_targets == nullptr))
    throw ConfigError("merged loss: exactly one of hard labels / soft targets");
  if (!opts.mask) throw ConfigError("merged loss: active unit mask required");
  if (opts.conditional_kl && cfg_.prior != LatentPrior::gaussian_mixture)
    throw ConfigError("merged loss: conditional KL requires the mixture prior");
  if (opts.conditional_kl && !opts.gate_classes)
    throw ConfigError("merged loss: conditional KL requires per-row classes");
  if (cfg_.gating && opts.gate_classes)
    for (const int c : *opts.gate_classes)
      if (!gating_masks_.count(c))
        throw ConfigError("gating mask missing for class " + std::to_string(c));

  const int L = cfg_.internal_replay_layer;
  auto& blocks = trunk();
  const int n_blocks = static_cast<int>(blocks.size());

  // Level-L representation: either provided directly (replay) or computed
  // from features. Frozen lower blocks run without caches or stat updates.
  Mat rep;
  const bool lower_in_graph = !opts.input_is_representation && L > 0 && !lower_frozen_;
  if (opts.input_is_representation) {
    if (input.cols() != rep_dim())
      throw DimensionError("merged loss: representation dim mismatch");
    rep = input;
  } else {
    rep = input;
    for (int b = 0; b < L; ++b) {
      auto& block = blocks[static_cast<std::size_t>(b)];
      rep = lower_frozen_ ? block.forward_const(rep)
                          : block.forward(rep, opts.training, opts.dropout_rng);
    }
  }

  // Shared encoder pass above L (single pass feeds head and latent path).
  Mat h = rep;
  for (int b = L; b < n_blocks; ++b)
    h = blocks[static_cast<std::size_t>(b)].forward(h, opts.training, opts.dropout_rng);
  const Mat logits = classifier_.output_layer().forward(h);

  LossTerms terms;
  Mat d_logits_full;
  if (opts.hard_labels) {
    MaskedCeResult ce = masked_cross_entropy_full(logits, *opts.mask, *opts.hard_labels);
    terms.classification = ce.loss;
    d_logits_full = std::move(ce.d_logits);
  } else {
    opts.mask->validate(logits.cols());
    const Mat active = select_columns(logits, opts.mask->active);
    const LossGrad kd = distillation_kl(active, *opts.soft_targets, opts.distill_temperature);
    terms.classification = kd.loss;
    d_logits_full = Mat::Zero(logits.rows(), logits.cols());
    for (std::size_t j = 0; j < opts.mask->active.size(); ++j)
      d_logits_full.col(opts.mask->active[j]) = kd.grad.col(static_cast<Index>(j));
  }

  // Generative path: encode h -> (mu, logvar) -> z -> gated decode -> rep.
  const Mat mu = mu_head_.forward(h);
  const Mat logvar_pre = logvar_head_.forward(h);
  const LatentSample s = reparameterize(mu, logvar_pre, noise, cfg_.logvar_clamp);

  std::vector<Mat> gate_caches(decoder_.size());
  Mat dec = s.z;
  for (std::size_t b = 0; b < decoder_.size(); ++b) {
    dec = decoder_[b].forward(dec, opts.training, opts.dropout_rng);
    if (cfg_.gating && opts.gate_classes)
      dec = apply_gating(dec, b, *opts.gate_classes, &gate_caches[b]);
  }
  const Mat recon_out = recon_head_.forward(dec);

  const Scalar w = opts.loss_weight;
  const Scalar gw = w * opts.generative_weight;

  const FeatureKind recon_kind = L == 0 ? cfg_.recon_kind : FeatureKind::real;
  const ReconGrad recon = reconstruction_loss(recon_out, rep, recon_kind);
  KlGrad kl;
  if (cfg_.prior == LatentPrior::standard_normal) {
    kl = kl_standard_normal(s);
  } else {
    MatRM d_modes = MatRM::Zero(modes_.rows(), modes_.cols());
    kl = kl_monte_carlo_mixture(s, modes_,
                                opts.conditional_kl ? opts.gate_classes : nullptr,
                                nullptr, &d_modes);
    grad_modes_ += gw * d_modes;
  }
  terms.reconstruction = recon.loss;
  terms.kl = kl.kl;

  // Classification backward (own pass through the upper trunk).
  Mat d_h_ce = classifier_.output_layer().backward(w * d_logits_full);

  // Generative backward: decoder to d_z, then through the reparameterization.
  Mat d_dec = recon_head_.backward(gw * recon.d_out);
  for (std::size_t b = decoder_.size(); b-- > 0;) {
    if (cfg_.gating && opts.gate_classes) d_dec.array() *= gate_caches[b].array();
    d_dec = decoder_[b].backward(d_dec);
  }
  const Mat d_z = d_dec + gw * kl.d_z;
  const Mat sigma_half_noise =
      (0.5 * (0.5 * s.logvar.array()).exp() * s.noise.array()).matrix();
  const Mat d_mu = d_z + gw * kl.d_mu;
  const Mat d_logvar_pre =
      ((d_z.array() * sigma_half_noise.array() + gw * kl.d_logvar.array()) *
       s.clamp_mask.array())
          .matrix();
  Mat d_h_gen = mu_head_.backward(d_mu) + logvar_head_.backward(d_logvar_pre);

  // The generative path treats rep as data: only the classification gradient
  // continues below L. Two passes through the upper blocks keep them apart.
  Mat d_rep_ce = d_h_ce;
  for (int b = n_blocks; b-- > L;)
    d_rep_ce = blocks[static_cast<std::size_t>(b)].backward(d_rep_ce);
  Mat d_rep_gen = d_h_gen;
  for (int b = n_blocks; b-- > L;)
    d_rep_gen = blocks[static_cast<std::size_t>(b)].backward(d_rep_gen);

  if (lower_in_graph) {
    Mat d_low = d_rep_ce;
    for (int b = L; b-- > 0;)
      d_low = blocks[static_cast<std::size_t>(b)].backward(d_low);
  }
  (void)d_rep_gen; // rep is data for the generative path; gradient stops here

  terms.classification *= w;
  terms.reconstruction *= gw;
  terms.kl *= gw;
  return terms;
}

MergedGenerativeClassifier::ForwardView MergedGenerativeClassifier::forward_view(
    const Mat& x, const ActiveUnitMask& mask, const Mat& noise) const {
  ForwardView view;
  const Mat rep = internal_replay_targets(x);
  Mat h = rep;
  const auto& blocks = trunk();
  for (int b = cfg_.internal_replay_layer; b < static_cast<int>(blocks.size()); ++b)
    h = blocks[static_cast<std::size_t>(b)].forward_const(h);
  mask.validate(classifier_.n_output_units());
  view.logits = select_columns(classifier_.output_layer().forward_const(h), mask.active);
  view.mu = mu_head_.forward_const(h);
  view.logvar = logvar_head_.forward_const(h)
                    .array()
                    .min(cfg_.logvar_clamp)
                    .max(-cfg_.logvar_clamp);
  const Mat z =
      view.mu.array() + (0.5 * view.logvar.array()).exp() * noise.array();
  view.reconstruction = decode(z);
  return view;
}

Mat MergedGenerativeClassifier::sample_latent(Index n, Rng& rng,
                                              const std::vector<int>& classes) const {
  Mat z(n, cfg_.latent_dim);
  for (Index i = 0; i < n; ++i) {
    const Vec eps = rng.normal_vec(cfg_.latent_dim);
    if (cfg_.prior == LatentPrior::gaussian_mixture) {
      const int c = classes[static_cast<std::size_t>(i)];
      if (c < 0 || c >= modes_.rows())
        throw ConfigError("sample_latent: unknown mode " + std::to_string(c));
      z.row(i) = modes_.row(c) + eps.transpose();
    } else {
      z.row(i) = eps.transpose();
    }
  }
  return z;
}

void draw_gating_masks(MergedGenerativeClassifier& mm, int class_id,
                       Scalar gate_fraction, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "gating", static_cast<std::uint64_t>(class_id)));
  mm.draw_gating_masks(class_id, gate_fraction, rng);
}

} // namespace tabcl
