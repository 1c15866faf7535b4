#include "tabcl/model/vae.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <cmath>

namespace tabcl {

LatentSample reparameterize(const Mat& mu, const Mat& logvar_pre, const Mat& noise,
                            Scalar logvar_clamp) {
  LatentSample s;
  s.mu = mu;
  s.clamp_mask = ((logvar_pre.array() > -logvar_clamp) &&
                  (logvar_pre.array() < logvar_clamp))
                     .cast<Scalar>();
  s.logvar = logvar_pre.array().min(logvar_clamp).max(-logvar_clamp);
  s.noise = noise;
  s.z = mu.array() + (0.5 * s.logvar.array()).exp() * noise.array();
  return s;
}

KlGrad kl_standard_normal(const LatentSample& s) {
  const Scalar n = static_cast<Scalar>(s.mu.rows());
  KlGrad out;
  out.kl = 0.5 *
           (s.mu.array().square() + s.logvar.array().exp() - 1.0 - s.logvar.array())
               .sum() /
           n;
  out.d_mu = s.mu / n;
  out.d_logvar = (0.5 * (s.logvar.array().exp() - 1.0) / n).matrix();
  out.d_z = Mat::Zero(s.z.rows(), s.z.cols());
  return out;
}

KlGrad kl_monte_carlo_mixture(const LatentSample& s, const MatRM& modes,
                              const std::vector<int>* class_ids,
                              const std::vector<int>* mix_modes, MatRM* d_modes) {
  static constexpr Scalar log2pi = 1.8378770664093454836;
  const Index n = s.z.rows();
  const Index d = s.z.cols();
  const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
  KlGrad out;
  out.d_mu = Mat::Zero(n, d);
  out.d_z = Mat::Zero(n, d);
  // log q(z|x) composed with the reparameterization collapses to
  // -0.5 * sum(log 2*pi + logvar + noise^2): constant in mu and z, with
  // d/dlogvar = -0.5 exactly.
  Scalar log_q = 0.0;
  for (Index i = 0; i < n; ++i)
    log_q += -0.5 * (static_cast<Scalar>(d) * log2pi + s.logvar.row(i).sum() +
                     s.noise.row(i).squaredNorm());
  out.d_logvar = Mat::Constant(n, d, -0.5 * inv_n);

  Scalar log_p = 0.0;
  if (class_ids) {
    if (static_cast<Index>(class_ids->size()) != n)
      throw DimensionError("mixture KL: class id count mismatch");
    for (Index i = 0; i < n; ++i) {
      const int c = (*class_ids)[static_cast<std::size_t>(i)];
      if (c < 0 || c >= modes.rows())
        throw ConfigError("mixture KL: unknown mode " + std::to_string(c));
      const RowVec diff = s.z.row(i) - modes.row(c);
      log_p += -0.5 * (static_cast<Scalar>(d) * log2pi + diff.squaredNorm());
      out.d_z.row(i) += diff * inv_n; // d(-log p)/dz
      if (d_modes) d_modes->row(c) -= diff * inv_n;
    }
  } else {
    std::vector<int> all;
    if (!mix_modes) {
      all.resize(static_cast<std::size_t>(modes.rows()));
      for (int c = 0; c < modes.rows(); ++c) all[static_cast<std::size_t>(c)] = c;
      mix_modes = &all;
    }
    if (mix_modes->empty()) throw ConfigError("mixture KL: no modes to mix over");
    const Scalar log_w = -std::log(static_cast<Scalar>(mix_modes->size()));
    for (Index i = 0; i < n; ++i) {
      Vec comp(static_cast<Index>(mix_modes->size()));
      for (std::size_t k = 0; k < mix_modes->size(); ++k) {
        const RowVec diff = s.z.row(i) - modes.row((*mix_modes)[k]);
        comp[static_cast<Index>(k)] = -0.5 * diff.squaredNorm();
      }
      const Scalar lse = logsumexp(comp);
      log_p += log_w - 0.5 * static_cast<Scalar>(d) * log2pi + lse;
      const Vec w = (comp.array() - lse).exp();
      for (std::size_t k = 0; k < mix_modes->size(); ++k) {
        const int c = (*mix_modes)[k];
        const RowVec diff = s.z.row(i) - modes.row(c);
        out.d_z.row(i) += w[static_cast<Index>(k)] * diff * inv_n;
        if (d_modes) d_modes->row(c) -= w[static_cast<Index>(k)] * diff * inv_n;
      }
    }
  }
  out.kl = (log_q - log_p) * inv_n;
  return out;
}

ReconGrad reconstruction_loss(const Mat& decoder_out, const Mat& target, FeatureKind kind) {
  if (decoder_out.rows() != target.rows() || decoder_out.cols() != target.cols())
    throw DimensionError("reconstruction loss: shape mismatch");
  const Scalar inv_n = 1.0 / static_cast<Scalar>(decoder_out.rows());
  ReconGrad out;
  if (kind == FeatureKind::boolean) {
    // softplus(o) - x*o summed over features == Bernoulli cross-entropy
    const auto o = decoder_out.array();
    const Mat softplus =
        (o.max(0.0) + (1.0 + (-o.abs()).exp()).log()).matrix();
    out.loss = (softplus.array() - target.array() * o).sum() * inv_n;
    const Mat sigmoid = (1.0 / (1.0 + (-o).exp())).matrix();
    out.d_out = (sigmoid - target) * inv_n;
  } else {
    const Mat diff = decoder_out - target;
    out.loss = 0.5 * diff.squaredNorm() * inv_n;
    out.d_out = diff * inv_n;
  }
  return out;
}

Mat decoder_output_to_features(const Mat& decoder_out, FeatureKind kind) {
  if (kind == FeatureKind::boolean)
    return (1.0 / (1.0 + (-decoder_out.array()).exp())).matrix();
  return decoder_out;
}

void VAEConfig::validate() const {
  if (input_dim < 1) throw ConfigError("vae: input_dim must be >= 1");
  if (latent_dim < 1) throw ConfigError("vae: latent_dim must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("vae: dropout_rate must be in [0,1)");
  if (prior == LatentPrior::gaussian_mixture && n_modes < 1)
    throw ConfigError("vae: mixture prior requires n_modes >= 1");
  if (logvar_clamp <= 0) throw ConfigError("vae: logvar_clamp must be > 0");
  for (const Index w : encoder_widths)
    if (w < 1) throw ConfigError("vae: encoder widths must be positive");
}

VAEModel::VAEModel(const VAEConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(init_seed, "vae_init"));
  Index in = cfg_.input_dim;
  for (const Index w : cfg_.encoder_widths) {
    HiddenBlock block;
    block.init(in, w, cfg_.use_batch_norm, cfg_.dropout_rate, rng);
    encoder_.push_back(std::move(block));
    in = w;
  }
  mu_head_.init(in, cfg_.latent_dim, rng);
  logvar_head_.init(in, cfg_.latent_dim, rng);

  Index dec_in = cfg_.latent_dim;
  for (auto it = cfg_.encoder_widths.rbegin(); it != cfg_.encoder_widths.rend(); ++it) {
    HiddenBlock block;
    block.init(dec_in, *it, cfg_.use_batch_norm, cfg_.dropout_rate, rng);
    decoder_.push_back(std::move(block));
    dec_in = *it;
  }
  recon_head_.init(dec_in, cfg_.input_dim, rng);

  if (cfg_.prior == LatentPrior::gaussian_mixture) {
    modes_.resize(cfg_.n_modes, cfg_.latent_dim);
    for (Index r = 0; r < modes_.rows(); ++r)
      for (Index c = 0; c < modes_.cols(); ++c) modes_(r, c) = 0.1 * rng.normal();
    grad_modes_ = MatRM::Zero(modes_.rows(), modes_.cols());
  }
}

void VAEModel::encode(const Mat& x, Mat& mu, Mat& logvar) const {
  Mat h = x;
  for (const auto& block : encoder_) h = block.forward_const(h);
  mu = mu_head_.forward_const(h);
  logvar = logvar_head_.forward_const(h)
               .array()
               .min(cfg_.logvar_clamp)
               .max(-cfg_.logvar_clamp);
}

Mat VAEModel::decode(const Mat& z) const {
  Mat h = z;
  for (const auto& block : decoder_) h = block.forward_const(h);
  return decoder_output_to_features(recon_head_.forward_const(h), cfg_.recon_kind);
}

std::vector<ParamBlob> VAEModel::blobs() {
  std::vector<ParamBlob> out;
  for (auto& block : encoder_) block.collect_blobs(out);
  mu_head_.collect_blobs(out);
  logvar_head_.collect_blobs(out);
  for (auto& block : decoder_) block.collect_blobs(out);
  recon_head_.collect_blobs(out);
  if (modes_.size() > 0)
    out.push_back({modes_.data(), grad_modes_.data(), modes_.size()});
  return out;
}

void VAEModel::zero_grad() {
  for (auto& block : encoder_) block.zero_grad();
  mu_head_.zero_grad();
  logvar_head_.zero_grad();
  for (auto& block : decoder_) block.zero_grad();
  recon_head_.zero_grad();
  if (grad_modes_.size() > 0) grad_modes_.setZero();
}

Index VAEModel::n_params() const {
  auto& self = const_cast<VAEModel&>(*this);
  Index n = 0;
  for (const auto& blob : self.blobs()) n += blob.size;
  return n;
}

Vec VAEModel::flat_params() const {
  auto& self = const_cast<VAEModel&>(*this);
  Vec theta(n_params());
  Index at = 0;
  for (const auto& blob : self.blobs()) {
    theta.segment(at, blob.size) = Eigen::Map<const Vec>(blob.param, blob.size);
    at += blob.size;
  }
  return theta;
}

void VAEModel::set_flat_params(const Vec& theta) {
  if (theta.size() != n_params()) throw DimensionError("vae set_flat_params: length mismatch");
  Index at = 0;
  for (const auto& blob : blobs()) {
    Eigen::Map<Vec>(blob.param, blob.size) = theta.segment(at, blob.size);
    at += blob.size;
  }
}

VAEModel::LossTerms VAEModel::loss_backward(const Mat& x, const Mat& noise,
                                            bool training, Rng* dropout_rng,
                                            const std::vector<int>* class_ids,
                                            const std::vector<int>* mix_modes,
                                            Scalar loss_weight) {
  if (x.cols() != cfg_.input_dim) throw DimensionError("vae: input dim mismatch");
  if (noise.rows() != x.rows() || noise.cols() != cfg_.latent_dim)
    throw DimensionError("vae: noise must be n x latent_dim");
  if (class_ids && cfg_.prior != LatentPrior::gaussian_mixture)
    throw ConfigError("vae: class-conditional KL requires the mixture prior");

  Mat h = x;
  for (auto& block : encoder_) h = block.forward(h, training, dropout_rng);
  const Mat mu = mu_head_.forward(h);
  const Mat logvar_pre = logvar_head_.forward(h);
  const LatentSample s = reparameterize(mu, logvar_pre, noise, cfg_.logvar_clamp);

  Mat dec = s.z;
  for (auto& block : decoder_) dec = block.forward(dec, training, dropout_rng);
  const Mat out = recon_head_.forward(dec);

  const Scalar w = loss_weight;
  const ReconGrad recon = reconstruction_loss(out, x, cfg_.recon_kind);
  KlGrad kl;
  if (cfg_.prior == LatentPrior::standard_normal) {
    kl = kl_standard_normal(s);
  } else {
    MatRM d_modes = MatRM::Zero(modes_.rows(), modes_.cols());
    kl = kl_monte_carlo_mixture(s, modes_, class_ids, mix_modes, &d_modes);
    grad_modes_ += w * d_modes;
  }

  // Decoder backward to d_z, then add the KL's z-path and route through the
  // reparameterization into the heads.
  Mat d_dec = recon_head_.backward(w * recon.d_out);
  for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) d_dec = it->backward(d_dec);
  const Mat d_z = d_dec + w * kl.d_z;

  const Mat sigma_half_noise =
      (0.5 * (0.5 * s.logvar.array()).exp() * s.noise.array()).matrix();
  const Mat d_mu = d_z + w * kl.d_mu;
  const Mat d_logvar_pre =
      ((d_z.array() * sigma_half_noise.array() + w * kl.d_logvar.array()) *
       s.clamp_mask.array())
          .matrix();

  Mat d_h = mu_head_.backward(d_mu) + logvar_head_.backward(d_logvar_pre);
  for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) d_h = it->backward(d_h);

  return {w * recon.loss, w * kl.kl};
}

VAEModel::LossTerms vae_loss(VAEModel& v, const Mat& x, const Mat& noise,
                             const std::vector<int>* class_ids) {
  v.zero_grad();
  return v.loss_backward(x, noise, false, nullptr, class_ids);
}

Mat sample_latent(const VAEModel& v, Index n, Rng& rng, std::optional<int> class_id,
                  const std::vector<int>* known_modes) {
  const Index d = v.latent_dim();
  Mat z(n, d);
  const bool mixture = v.config().prior == LatentPrior::gaussian_mixture;
  if (class_id && !mixture)
    throw ConfigError("sample_generator: class conditioning requires the mixture prior");
  if (class_id && (*class_id < 0 || *class_id >= v.modes().rows()))
    throw ConfigError("sample_generator: unknown class " + std::to_string(*class_id));
  for (Index i = 0; i < n; ++i) {
    Vec eps = rng.normal_vec(d);
    if (!mixture) {
      z.row(i) = eps.transpose();
    } else {
      int mode;
      if (class_id) {
        mode = *class_id;
      } else if (known_modes && !known_modes->empty()) {
        mode = (*known_modes)[static_cast<std::size_t>(
            rng.uniform_below(known_modes->size()))];
      } else {
        mode = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(v.modes().rows())));
      }
      z.row(i) = v.modes().row(mode) + eps.transpose();
    }
  }
  return z;
}

Mat sample_generator(const VAEModel& v, Index n, Rng& rng, std::optional<int> class_id,
                     const std::vector<int>* known_modes) {
  if (n == 0) return Mat(0, v.config().input_dim);
  return v.decode(sample_latent(v, n, rng, class_id, known_modes));
}

} // namespace tabcl
