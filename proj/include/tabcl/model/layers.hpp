#ifndef TABCL_MODEL_LAYERS_HPP
#define TABCL_MODEL_LAYERS_HPP

#include "tabcl/rng.hpp"
#include "tabcl/types.hpp"

#include <optional>
#include <vector>

namespace tabcl {

// Row-major weights keep each output unit's parameters contiguous, so
// appending output units appends to the flat parameter view.
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A contiguous trainable parameter blob paired with its gradient. Frozen
// blobs stay in place (so optimizer slots keep their positions) but must not
// be updated.
struct ParamBlob {
  Scalar* param = nullptr;
  Scalar* grad = nullptr;
  Index size = 0;
  bool frozen = false;
};

struct LinearLayer {
  MatRM weight; // out x in
  Vec bias;
  MatRM grad_weight;
  Vec grad_bias;

  void init(Index in_dim, Index out_dim, Rng& rng);
  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }

  Mat forward(const Mat& x);        // caches x for backward
  Mat forward_const(const Mat& x) const;
  Mat backward(const Mat& d_out);   // accumulates grads, returns d_in

  void zero_grad();
  void collect_blobs(std::vector<ParamBlob>& out);
  Index param_count() const { return weight.size() + bias.size(); }

 private:
  Mat input_cache_;
};

struct BatchNormLayer {
  Vec gamma, beta;
  Vec running_mean, running_var; // not trainable; unbiased running variance
  Vec grad_gamma, grad_beta;
  Scalar eps = 1e-5;
  Scalar momentum = 0.1;

  void init(Index dim);
  Index dim() const { return gamma.size(); }

  // training=true normalizes with batch statistics and updates the running
  // estimates; training=false uses the running estimates (frozen).
  Mat forward(const Mat& x, bool training);
  Mat forward_const(const Mat& x) const; // eval only
  Mat backward(const Mat& d_out);

  void zero_grad();
  void collect_blobs(std::vector<ParamBlob>& out);
  Index param_count() const { return gamma.size() + beta.size(); }

 private:
  Mat xhat_cache_;
  Mat centered_cache_;
  Vec invstd_cache_;
  bool trained_forward_ = false;
};

struct ReluLayer {
  Mat forward(const Mat& x);
  Mat forward_const(const Mat& x) const { return x.cwiseMax(0.0); }
  Mat backward(const Mat& d_out) const;

 private:
  Mat input_cache_;
};

// Linear -> (BatchNorm) -> ReLU -> (Dropout).
struct HiddenBlock {
  LinearLayer linear;
  std::optional<BatchNormLayer> batch_norm;
  ReluLayer relu;
  Scalar dropout_rate = 0.0;

  void init(Index in_dim, Index out_dim, bool use_batch_norm, Scalar dropout,
            Rng& rng);
  Index out_dim() const { return linear.out_dim(); }

  Mat forward(const Mat& x, bool training, Rng* dropout_rng);
  Mat forward_const(const Mat& x) const; // eval, no caches
  Mat backward(const Mat& d_out);

  void zero_grad();
  void collect_blobs(std::vector<ParamBlob>& out);
  Index param_count() const;

 private:
  Mat dropout_mask_;
  bool dropout_active_ = false;
};

} // namespace tabcl

#endif
