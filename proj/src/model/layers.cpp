#include "tabcl/model/layers.hpp"

#include "tabcl/errors.hpp"

#include <cmath>

namespace tabcl {

void LinearLayer::init(Index in_dim, Index out_dim, Rng& rng) {
  const Scalar scale = std::sqrt(2.0 / static_cast<Scalar>(in_dim));
  weight.resize(out_dim, in_dim);
  for (Index r = 0; r < out_dim; ++r)
    for (Index c = 0; c < in_dim; ++c) weight(r, c) = scale * rng.normal();
  bias = Vec::Zero(out_dim);
  grad_weight = MatRM::Zero(out_dim, in_dim);
  grad_bias = Vec::Zero(out_dim);
}

Mat LinearLayer::forward(const Mat& x) {
  input_cache_ = x;
  return forward_const(x);
}

Mat LinearLayer::forward_const(const Mat& x) const {
  if (x.cols() != weight.cols())
    throw DimensionError("linear: input has " + std::to_string(x.cols()) +
                         " features, layer expects " + std::to_string(weight.cols()));
  return (x * weight.transpose()).rowwise() + bias.transpose();
}

Mat LinearLayer::backward(const Mat& d_out) {
  grad_weight += d_out.transpose() * input_cache_;
  grad_bias += d_out.colwise().sum().transpose();
  return d_out * weight;
}

void LinearLayer::zero_grad() {
  grad_weight.setZero();
  grad_bias.setZero();
}

void LinearLayer::collect_blobs(std::vector<ParamBlob>& out) {
  out.push_back({weight.data(), grad_weight.data(), weight.size()});
  out.push_back({bias.data(), grad_bias.data(), bias.size()});
}

void BatchNormLayer::init(Index dim) {
  gamma = Vec::Ones(dim);
  beta = Vec::Zero(dim);
  running_mean = Vec::Zero(dim);
  running_var = Vec::Ones(dim);
  grad_gamma = Vec::Zero(dim);
  grad_beta = Vec::Zero(dim);
}

Mat BatchNormLayer::forward(const Mat& x, bool training) {
  if (x.cols() != gamma.size())
    throw DimensionError("batch_norm: feature count mismatch");
  trained_forward_ = training;
  if (!training) {
    invstd_cache_ = (running_var.array() + eps).rsqrt();
    centered_cache_ = x.rowwise() - running_mean.transpose();
    xhat_cache_ = centered_cache_.array().rowwise() * invstd_cache_.transpose().array();
    return (xhat_cache_.array().rowwise() * gamma.transpose().array()).matrix().rowwise() +
           beta.transpose();
  }
  const Index n = x.rows();
  const Vec mean = x.colwise().mean();
  centered_cache_ = x.rowwise() - mean.transpose();
  const Vec var = centered_cache_.array().square().colwise().mean();
  invstd_cache_ = (var.array() + eps).rsqrt();
  xhat_cache_ = centered_cache_.array().rowwise() * invstd_cache_.transpose().array();

  const Scalar unbias = n > 1 ? static_cast<Scalar>(n) / static_cast<Scalar>(n - 1) : 1.0;
  running_mean = (1.0 - momentum) * running_mean + momentum * mean;
  running_var = (1.0 - momentum) * running_var + momentum * (unbias * var);

  return (xhat_cache_.array().rowwise() * gamma.transpose().array()).matrix().rowwise() +
         beta.transpose();
}

Mat BatchNormLayer::forward_const(const Mat& x) const {
  const Vec invstd = (running_var.array() + eps).rsqrt();
  Mat xhat = (x.rowwise() - running_mean.transpose()).array().rowwise() *
             invstd.transpose().array();
  return (xhat.array().rowwise() * gamma.transpose().array()).matrix().rowwise() +
         beta.transpose();
}

Mat BatchNormLayer::backward(const Mat& d_out) {
  grad_gamma += (d_out.array() * xhat_cache_.array()).colwise().sum().transpose().matrix();
  grad_beta += d_out.colwise().sum().transpose();

  Mat dxhat = d_out.array().rowwise() * gamma.transpose().array();
  if (!trained_forward_) {
    // Frozen statistics: the transform is affine in x.
    return dxhat.array().rowwise() * invstd_cache_.transpose().array();
  }
  const Scalar n = static_cast<Scalar>(d_out.rows());
  const RowVec sum_dxhat = dxhat.colwise().sum();
  const RowVec sum_dxhat_xhat = (dxhat.array() * xhat_cache_.array()).colwise().sum();
  Mat dx = n * dxhat;
  dx.rowwise() -= sum_dxhat;
  dx.array() -= xhat_cache_.array().rowwise() * sum_dxhat_xhat.array();
  dx.array().rowwise() *= (invstd_cache_.transpose().array() / n);
  return dx;
}

void BatchNormLayer::zero_grad() {
  grad_gamma.setZero();
  grad_beta.setZero();
}

void BatchNormLayer::collect_blobs(std::vector<ParamBlob>& out) {
  out.push_back({gamma.data(), grad_gamma.data(), gamma.size()});
  out.push_back({beta.data(), grad_beta.data(), beta.size()});
}

Mat ReluLayer::forward(const Mat& x) {
  input_cache_ = x;
  return x.cwiseMax(0.0);
}

Mat ReluLayer::backward(const Mat& d_out) const {
  return (input_cache_.array() > 0.0).cast<Scalar>() * d_out.array();
}

void HiddenBlock::init(Index in_dim, Index out_dim, bool use_batch_norm,
                       Scalar dropout, Rng& rng) {
  linear.init(in_dim, out_dim, rng);
  if (use_batch_norm) {
    batch_norm.emplace();
    batch_norm->init(out_dim);
  }
  dropout_rate = dropout;
}

Mat HiddenBlock::forward(const Mat& x, bool training, Rng* dropout_rng) {
  Mat h = linear.forward(x);
  if (batch_norm) h = batch_norm->forward(h, training);
  h = relu.forward(h);
  dropout_active_ = training && dropout_rate > 0.0;
  if (dropout_active_) {
    if (!dropout_rng) throw ConfigError("dropout requires an rng in training mode");
    const Scalar keep = 1.0 - dropout_rate;
    dropout_mask_.resize(h.rows(), h.cols());
    for (Index c = 0; c < h.cols(); ++c)
      for (Index r = 0; r < h.rows(); ++r)
        dropout_mask_(r, c) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    h.array() *= dropout_mask_.array();
  }
  return h;
}

Mat HiddenBlock::forward_const(const Mat& x) const {
  Mat h = linear.forward_const(x);
  if (batch_norm) h = batch_norm->forward_const(h);
  return relu.forward_const(h);
}

Mat HiddenBlock::backward(const Mat& d_out) {
  Mat d = d_out;
  if (dropout_active_) d.array() *= dropout_mask_.array();
  d = relu.backward(d);
  if (batch_norm) d = batch_norm->backward(d);
  return linear.backward(d);
}

void HiddenBlock::zero_grad() {
  linear.zero_grad();
  if (batch_norm) batch_norm->zero_grad();
}

void HiddenBlock::collect_blobs(std::vector<ParamBlob>& out) {
  linear.collect_blobs(out);
  if (batch_norm) batch_norm->collect_blobs(out);
}

Index HiddenBlock::param_count() const {
  return linear.param_count() + (batch_norm ? batch_norm->param_count() : 0);
}

} // namespace tabcl
