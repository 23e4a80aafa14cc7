// Copyright 2026 The mvlad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "numerics/attention.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "core/error.hpp"

namespace mvlad::numerics {
namespace {

constexpr double kLayerNormEps = 1e-5;

using Index = Eigen::Index;

ConstMatrixMap cmat(std::span<const double> p, std::size_t offset, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(p.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols));
}

MatrixMap mmat(std::span<double> p, std::size_t offset, std::size_t rows, std::size_t cols) {
  return MatrixMap(p.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols));
}

Eigen::Map<const Eigen::RowVectorXd> crow(std::span<const double> p, std::size_t offset, std::size_t n) {
  return Eigen::Map<const Eigen::RowVectorXd>(p.data() + offset, static_cast<Index>(n));
}

Eigen::Map<Eigen::RowVectorXd> mrow(std::span<double> p, std::size_t offset, std::size_t n) {
  return Eigen::Map<Eigen::RowVectorXd>(p.data() + offset, static_cast<Index>(n));
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void fill_normal(std::span<double> p, std::size_t offset, std::size_t n, double stddev, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) p[offset + i] = stddev * rng.normal();
}

void fill_constant(std::span<double> p, std::size_t offset, std::size_t n, double value) {
  for (std::size_t i = 0; i < n; ++i) p[offset + i] = value;
}

}  // namespace

BlockLayout BlockLayout::at(std::size_t base, const BlockShape& shape) {
  require(shape.heads > 0 && shape.width % shape.heads == 0, ErrorKind::kShape,
          "width " + std::to_string(shape.width) + " is not divisible by heads " +
              std::to_string(shape.heads));
  const std::size_t d = shape.width;
  const std::size_t f = shape.ff_width;
  BlockLayout l{};
  l.shape = shape;
  std::size_t o = base;
  l.ln1_gain = o; o += d;
  l.ln1_bias = o; o += d;
  l.w_qkv = o; o += d * 3 * d;
  l.b_qkv = o; o += 3 * d;
  l.w_out = o; o += d * d;
  l.b_out = o; o += d;
  l.ln2_gain = o; o += d;
  l.ln2_bias = o; o += d;
  l.w_ff1 = o; o += d * f;
  l.b_ff1 = o; o += f;
  l.w_ff2 = o; o += f * d;
  l.b_ff2 = o; o += d;
  l.end = o;
  return l;
}

void init_block(std::span<double> params, const BlockLayout& l, Rng& rng) {
  const std::size_t d = l.shape.width;
  const std::size_t f = l.shape.ff_width;
  fill_constant(params, l.ln1_gain, d, 1.0);
  fill_constant(params, l.ln1_bias, d, 0.0);
  fill_normal(params, l.w_qkv, d * 3 * d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  fill_constant(params, l.b_qkv, 3 * d, 0.0);
  fill_normal(params, l.w_out, d * d, 0.5 / std::sqrt(static_cast<double>(d)), rng);
  fill_constant(params, l.b_out, d, 0.0);
  fill_constant(params, l.ln2_gain, d, 1.0);
  fill_constant(params, l.ln2_bias, d, 0.0);
  fill_normal(params, l.w_ff1, d * f, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  fill_constant(params, l.b_ff1, f, 0.0);
  fill_normal(params, l.w_ff2, f * d, 0.5 / std::sqrt(static_cast<double>(f)), rng);
  fill_constant(params, l.b_ff2, d, 0.0);
}

void layer_norm_forward(const RowMatrix& x, std::span<const double> gain, std::span<const double> bias,
                        RowMatrix& hat, Eigen::VectorXd& inv_std, RowMatrix& out) {
  const Index n = x.rows();
  const Index d = x.cols();
  hat.resize(n, d);
  out.resize(n, d);
  inv_std.resize(n);
  const Eigen::Map<const Eigen::RowVectorXd> g(gain.data(), d);
  const Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), d);
  for (Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = inv;
    hat.row(r) = (x.row(r).array() - mean) * inv;
    out.row(r) = hat.row(r).cwiseProduct(g) + b;
  }
}

RowMatrix layer_norm_backward(const RowMatrix& d_out, const RowMatrix& hat,
                              const Eigen::VectorXd& inv_std, std::span<const double> gain,
                              std::span<double> d_gain, std::span<double> d_bias) {
  const Index n = d_out.rows();
  const Index d = d_out.cols();
  const Eigen::Map<const Eigen::RowVectorXd> g(gain.data(), d);
  Eigen::Map<Eigen::RowVectorXd> dg(d_gain.data(), d);
  Eigen::Map<Eigen::RowVectorXd> db(d_bias.data(), d);
  dg += d_out.cwiseProduct(hat).colwise().sum();
  db += d_out.colwise().sum();
  RowMatrix dx(n, d);
  for (Index r = 0; r < n; ++r) {
    const Eigen::RowVectorXd dhat = d_out.row(r).cwiseProduct(g);
    const double mean_dhat = dhat.mean();
    const double mean_dhat_hat = dhat.dot(hat.row(r)) / static_cast<double>(d);
    dx.row(r) = inv_std[r] * (dhat.array() - mean_dhat - hat.row(r).array() * mean_dhat_hat);
  }
  return dx;
}

RowMatrix block_forward(std::span<const double> p, const BlockLayout& l, const RowMatrix& x,
                        std::size_t batch, std::size_t seq, BlockCache& c) {
  const std::size_t d = l.shape.width;
  const std::size_t f = l.shape.ff_width;
  const std::size_t heads = l.shape.heads;
  const std::size_t dh = d / heads;
  require(static_cast<std::size_t>(x.cols()) == d, ErrorKind::kShape,
          "block expects width " + std::to_string(d) + ", got " + std::to_string(x.cols()));
  require(static_cast<std::size_t>(x.rows()) == batch * seq, ErrorKind::kShape,
          "block input rows do not equal batch * seq");
  c.batch = batch;
  c.seq = seq;

  layer_norm_forward(x, p.subspan(l.ln1_gain, d), p.subspan(l.ln1_bias, d), c.ln1_hat, c.ln1_inv_std,
                     c.ln1_out);
  c.qkv.noalias() = c.ln1_out * cmat(p, l.w_qkv, d, 3 * d);
  c.qkv.rowwise() += crow(p, l.b_qkv, 3 * d);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index T = static_cast<Index>(seq);
  const Index DH = static_cast<Index>(dh);
  c.attn.resize(x.rows(), static_cast<Index>(d));
  c.probs.resize(batch * heads);
  for (std::size_t b = 0; b < batch; ++b) {
    const Index r0 = static_cast<Index>(b * seq);
    for (std::size_t h = 0; h < heads; ++h) {
      const Index q0 = static_cast<Index>(h * dh);
      const Index k0 = static_cast<Index>(d + h * dh);
      const Index v0 = static_cast<Index>(2 * d + h * dh);
      RowMatrix& P = c.probs[b * heads + h];
      P.noalias() = c.qkv.block(r0, q0, T, DH) * c.qkv.block(r0, k0, T, DH).transpose();
      P *= scale;
      for (Index r = 0; r < T; ++r) {
        const double peak = P.row(r).maxCoeff();
        P.row(r) = (P.row(r).array() - peak).exp();
        P.row(r) /= P.row(r).sum();
      }
      c.attn.block(r0, q0, T, DH).noalias() = P * c.qkv.block(r0, v0, T, DH);
    }
  }

  RowMatrix mid = x;
  mid.noalias() += c.attn * cmat(p, l.w_out, d, d);
  mid.rowwise() += crow(p, l.b_out, d);

  layer_norm_forward(mid, p.subspan(l.ln2_gain, d), p.subspan(l.ln2_bias, d), c.ln2_hat, c.ln2_inv_std,
                     c.ln2_out);
  c.ff_pre.noalias() = c.ln2_out * cmat(p, l.w_ff1, d, f);
  c.ff_pre.rowwise() += crow(p, l.b_ff1, f);
  c.ff_act = c.ff_pre.unaryExpr(&gelu);

  RowMatrix out = std::move(mid);
  out.noalias() += c.ff_act * cmat(p, l.w_ff2, f, d);
  out.rowwise() += crow(p, l.b_ff2, d);
  return out;
}

RowMatrix block_backward(std::span<const double> p, const BlockLayout& l, const BlockCache& c,
                         const RowMatrix& d_out, std::span<double> g) {
  const std::size_t d = l.shape.width;
  const std::size_t f = l.shape.ff_width;
  const std::size_t heads = l.shape.heads;
  const std::size_t dh = d / heads;

  // Feed-forward half.
  mmat(g, l.w_ff2, f, d).noalias() += c.ff_act.transpose() * d_out;
  mrow(g, l.b_ff2, d) += d_out.colwise().sum();
  RowMatrix d_pre = d_out * cmat(p, l.w_ff2, f, d).transpose();
  d_pre.array() *= c.ff_pre.unaryExpr(&gelu_grad).array();
  mmat(g, l.w_ff1, d, f).noalias() += c.ln2_out.transpose() * d_pre;
  mrow(g, l.b_ff1, f) += d_pre.colwise().sum();
  const RowMatrix d_ln2 = d_pre * cmat(p, l.w_ff1, d, f).transpose();
  RowMatrix d_mid = d_out;
  d_mid += layer_norm_backward(d_ln2, c.ln2_hat, c.ln2_inv_std, p.subspan(l.ln2_gain, d),
                               g.subspan(l.ln2_gain, d), g.subspan(l.ln2_bias, d));

  // Attention half.
  mmat(g, l.w_out, d, d).noalias() += c.attn.transpose() * d_mid;
  mrow(g, l.b_out, d) += d_mid.colwise().sum();
  const RowMatrix d_attn = d_mid * cmat(p, l.w_out, d, d).transpose();

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index T = static_cast<Index>(c.seq);
  const Index DH = static_cast<Index>(dh);
  RowMatrix d_qkv(c.qkv.rows(), c.qkv.cols());
  RowMatrix dP(T, T);
  for (std::size_t b = 0; b < c.batch; ++b) {
    const Index r0 = static_cast<Index>(b * c.seq);
    for (std::size_t h = 0; h < heads; ++h) {
      const Index q0 = static_cast<Index>(h * dh);
      const Index k0 = static_cast<Index>(d + h * dh);
      const Index v0 = static_cast<Index>(2 * d + h * dh);
      const RowMatrix& P = c.probs[b * heads + h];
      const auto dO = d_attn.block(r0, q0, T, DH);
      dP.noalias() = dO * c.qkv.block(r0, v0, T, DH).transpose();
      d_qkv.block(r0, v0, T, DH).noalias() = P.transpose() * dO;
      const Eigen::VectorXd row_dot = dP.cwiseProduct(P).rowwise().sum();
      RowMatrix dS = P.array() * (dP.colwise() - row_dot).array();
      dS *= scale;
      d_qkv.block(r0, q0, T, DH).noalias() = dS * c.qkv.block(r0, k0, T, DH);
      d_qkv.block(r0, k0, T, DH).noalias() = dS.transpose() * c.qkv.block(r0, q0, T, DH);
    }
  }
  mmat(g, l.w_qkv, d, 3 * d).noalias() += c.ln1_out.transpose() * d_qkv;
  mrow(g, l.b_qkv, 3 * d) += d_qkv.colwise().sum();
  const RowMatrix d_ln1 = d_qkv * cmat(p, l.w_qkv, d, 3 * d).transpose();
  RowMatrix d_x = d_mid;
  d_x += layer_norm_backward(d_ln1, c.ln1_hat, c.ln1_inv_std, p.subspan(l.ln1_gain, d),
                             g.subspan(l.ln1_gain, d), g.subspan(l.ln1_bias, d));
  return d_x;
}

AttentionBlock::AttentionBlock(const BlockShape& shape, Rng& rng) : layout_(BlockLayout::at(0, shape)) {
  params_.assign(layout_.end, 0.0);
  init_block(params_, layout_, rng);
}

Tensor AttentionBlock::forward(const Tensor& x) const {
  require(x.rank() == 2 && x.cols() == layout_.shape.width, ErrorKind::kShape,
          "attention block input must be seq x " + std::to_string(layout_.shape.width));
  BlockCache cache;
  const RowMatrix in = x.as_matrix();
  return Tensor::from(block_forward(params_, layout_, in, 1, x.rows(), cache));
}

Tensor AttentionBlock::backward(const Tensor& x, const Tensor& d_out, std::vector<double>& param_grad) const {
  require(x.shape() == d_out.shape(), ErrorKind::kShape, "gradient shape differs from input shape");
  BlockCache cache;
  const RowMatrix in = x.as_matrix();
  block_forward(params_, layout_, in, 1, x.rows(), cache);
  param_grad.assign(params_.size(), 0.0);
  const RowMatrix dy = d_out.as_matrix();
  return Tensor::from(block_backward(params_, layout_, cache, dy, param_grad));
}

}  // namespace mvlad::numerics
