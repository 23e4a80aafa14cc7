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

#include "geo_embedding/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "core/error.hpp"
#include "core/hash.hpp"
#include "json.hpp"

namespace mvlad::embed {
namespace {

using Eigen::Index;
using nlohmann::json;

constexpr double kMedianGuard = 1e-9;
constexpr double kNormGuard = 1e-12;

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Positions (within `values`) contributing to the median, with weights.
std::vector<std::pair<std::size_t, double>> median_terms(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  const std::size_t n = values.size();
  if (n % 2 == 1) return {{order[n / 2], 1.0}};
  return {{order[n / 2 - 1], 0.5}, {order[n / 2], 0.5}};
}

double median_of(const std::vector<double>& values) {
  double m = 0.0;
  for (const auto& [idx, wgt] : median_terms(values)) m += wgt * values[idx];
  return m;
}

}  // namespace

EmbedTrainConfig EmbedTrainConfig::from(const Config& cfg, std::uint64_t seed) {
  EmbedTrainConfig c;
  c.dim = cfg.get_uint("embed_dim", c.dim);
  c.k_start = cfg.get_uint("k_start", c.k_start);
  c.k_end = cfg.get_uint("k_end", c.k_end);
  c.tau = cfg.get_double("tau", c.tau);
  c.tau_con = cfg.get_double("tau_con", c.tau_con);
  c.lambda_recon = cfg.get_double("lambda_recon", c.lambda_recon);
  c.lambda_geom = cfg.get_double("lambda_geom", c.lambda_geom);
  c.lambda_contra = cfg.get_double("lambda_contra", c.lambda_contra);
  c.epochs = cfg.get_uint("embed_epochs", c.epochs);
  c.batch_size = cfg.get_uint("embed_batch_size", c.batch_size);
  c.learning_rate = cfg.get_double("embed_learning_rate", c.learning_rate);
  c.momentum = cfg.get_double("embed_momentum", c.momentum);
  c.max_samples = cfg.get_uint("embed_max_samples", c.max_samples);
  c.seed = seed;
  c.validate();
  return c;
}

void EmbedTrainConfig::validate() const {
  require(dim >= 1, ErrorKind::kValidation, "embedding width must be positive");
  require(k_start >= k_end && k_end >= 1, ErrorKind::kValidation, "curriculum needs k_start >= k_end >= 1");
  require(tau > 0.0 && tau_con > 0.0, ErrorKind::kValidation, "temperatures must be positive");
  require(lambda_recon >= 0.0 && lambda_geom >= 0.0 && lambda_contra >= 0.0, ErrorKind::kValidation,
          "loss weights must be non-negative");
  require(epochs >= 1, ErrorKind::kValidation, "at least one epoch is required");
  require(batch_size >= 3, ErrorKind::kValidation, "embedding batches need at least 3 points");
  require(learning_rate >= 0.0 && momentum >= 0.0 && momentum < 1.0, ErrorKind::kValidation,
          "learning rate must be non-negative and momentum in [0, 1)");
}

std::size_t curriculum_k(std::size_t epoch, std::size_t epochs, std::size_t k_start, std::size_t k_end) {
  if (epochs <= 1) return k_start;
  const double frac = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  const double k = static_cast<double>(k_start) + (static_cast<double>(k_end) - static_cast<double>(k_start)) * frac;
  return static_cast<std::size_t>(std::llround(k));
}

SoftAssignment soft_assign(Waypoint w, const Codebook& cb, const Tensor& embeddings, std::size_t k, double tau) {
  require(k >= 1 && k <= cb.size(), ErrorKind::kValidation,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(cb.size()) + "]");
  require(tau > 0.0, ErrorKind::kValidation, "tau must be positive");
  require(embeddings.rows() == cb.size(), ErrorKind::kShape, "embedding rows differ from codebook size");
  SoftAssignment out;
  out.indices = cb.nearest(w, k);
  std::vector<double> logits(k);
  for (std::size_t j = 0; j < k; ++j) {
    const Waypoint c = cb.dequantize(out.indices[j]);
    logits[j] = -std::hypot(w.x - c.x, w.y - c.y) / tau;
  }
  numerics::softmax_inplace(logits);
  out.weights = std::move(logits);
  const std::size_t d = embeddings.cols();
  out.z.assign(d, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto row = embeddings.row(out.indices[j]);
    for (std::size_t c = 0; c < d; ++c) out.z[c] += out.weights[j] * row[c];
  }
  return out;
}

Decoder::Decoder(std::size_t dim, std::size_t hidden)
    : dim_(dim), hidden_(hidden), params_(dim * hidden + hidden + hidden * 2 + 2, 0.0) {}

void Decoder::init(numerics::Rng& rng, Waypoint output_bias) {
  const double s1 = 1.0 / std::sqrt(static_cast<double>(dim_));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (std::size_t i = 0; i < dim_ * hidden_; ++i) params_[w1() + i] = s1 * rng.normal();
  for (std::size_t i = 0; i < hidden_; ++i) params_[b1() + i] = 0.0;
  for (std::size_t i = 0; i < hidden_ * 2; ++i) params_[w2() + i] = s2 * rng.normal();
  params_[b2()] = output_bias.x;
  params_[b2() + 1] = output_bias.y;
}

Waypoint Decoder::forward(std::span<const double> z) const {
  RowMatrix m(1, static_cast<Index>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) m(0, static_cast<Index>(i)) = z[i];
  const RowMatrix o = forward(m);
  return {o(0, 0), o(0, 1)};
}

RowMatrix Decoder::forward(const RowMatrix& z) const {
  require(static_cast<std::size_t>(z.cols()) == dim_, ErrorKind::kShape, "decoder input width mismatch");
  const numerics::ConstMatrixMap W1(params_.data() + w1(), static_cast<Index>(dim_), static_cast<Index>(hidden_));
  const numerics::ConstMatrixMap W2(params_.data() + w2(), static_cast<Index>(hidden_), 2);
  const Eigen::Map<const Eigen::RowVectorXd> B1(params_.data() + b1(), static_cast<Index>(hidden_));
  const Eigen::Map<const Eigen::RowVectorXd> B2(params_.data() + b2(), 2);
  RowMatrix h = z * W1;
  h.rowwise() += B1;
  h = h.array().tanh();
  RowMatrix o = h * W2;
  o.rowwise() += B2;
  return o;
}

RowMatrix Decoder::backward(const RowMatrix& z, const RowMatrix& d_out, std::span<double> g) const {
  const numerics::ConstMatrixMap W1(params_.data() + w1(), static_cast<Index>(dim_), static_cast<Index>(hidden_));
  const numerics::ConstMatrixMap W2(params_.data() + w2(), static_cast<Index>(hidden_), 2);
  const Eigen::Map<const Eigen::RowVectorXd> B1(params_.data() + b1(), static_cast<Index>(hidden_));
  RowMatrix h = z * W1;
  h.rowwise() += B1;
  h = h.array().tanh();
  if (!g.empty()) {
    numerics::MatrixMap(g.data() + w2(), static_cast<Index>(hidden_), 2).noalias() += h.transpose() * d_out;
    Eigen::Map<Eigen::RowVectorXd>(g.data() + b2(), 2) += d_out.colwise().sum();
  }
  RowMatrix d_pre = d_out * W2.transpose();
  d_pre.array() *= 1.0 - h.array().square();
  if (!g.empty()) {
    numerics::MatrixMap(g.data() + w1(), static_cast<Index>(dim_), static_cast<Index>(hidden_)).noalias() +=
        z.transpose() * d_pre;
    Eigen::Map<Eigen::RowVectorXd>(g.data() + b1(), static_cast<Index>(hidden_)) += d_pre.colwise().sum();
  }
  return d_pre * W1.transpose();
}

double loss_recon(const RowMatrix& z, std::span<const Waypoint> w, const Decoder& decoder, RowMatrix* d_z,
                  std::span<double> decoder_grad, double scale) {
  const auto n = static_cast<std::size_t>(z.rows());
  require(n >= 1 && n == w.size(), ErrorKind::kValidation, "reconstruction batch must be non-empty and aligned");
  const RowMatrix out = decoder.forward(z);
  RowMatrix d_out(static_cast<Index>(n), 2);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ex = out(static_cast<Index>(i), 0) - w[i].x;
    const double ey = out(static_cast<Index>(i), 1) - w[i].y;
    loss += ex * ex + ey * ey;
    d_out(static_cast<Index>(i), 0) = 2.0 * ex;
    d_out(static_cast<Index>(i), 1) = 2.0 * ey;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (d_z != nullptr || !decoder_grad.empty()) {
    d_out *= scale * inv_n;
    const RowMatrix dz = decoder.backward(z, d_out, decoder_grad);
    if (d_z != nullptr) *d_z += dz;
  }
  return loss * inv_n;
}

double loss_geom(const RowMatrix& z, std::span<const Waypoint> w, RowMatrix* d_z, double scale) {
  const auto n = static_cast<std::size_t>(z.rows());
  require(n >= 3, ErrorKind::kValidation, "geometry loss needs a batch of at least 3");
  require(n == w.size(), ErrorKind::kShape, "embedding and waypoint batches differ in size");
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<double> dz(pairs), dw(pairs);
  std::vector<std::pair<std::size_t, std::size_t>> idx(pairs);
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      idx[p] = {i, j};
      dz[p] = (z.row(static_cast<Index>(i)) - z.row(static_cast<Index>(j))).norm();
      dw[p] = std::hypot(w[i].x - w[j].x, w[i].y - w[j].y);
    }
  }
  const auto med_terms = median_terms(dz);
  double mz = 0.0;
  for (const auto& [k, wgt] : med_terms) mz += wgt * dz[k];
  const double mw = median_of(dw);
  if (mz < kMedianGuard || mw < kMedianGuard) return 0.0;

  const double inv_p = 1.0 / static_cast<double>(pairs);
  double loss = 0.0;
  std::vector<double> g_dz(pairs);
  double g_mz = 0.0;
  for (std::size_t q = 0; q < pairs; ++q) {
    const double r = dz[q] / mz - dw[q] / mw;
    loss += r * r;
    g_dz[q] = 2.0 * r / mz * inv_p;
    g_mz += -2.0 * r * dz[q] / (mz * mz) * inv_p;
  }
  if (d_z != nullptr) {
    for (const auto& [k, wgt] : med_terms) g_dz[k] += wgt * g_mz;
    for (std::size_t q = 0; q < pairs; ++q) {
      if (dz[q] <= 0.0) continue;
      const auto [i, j] = idx[q];
      const Eigen::RowVectorXd dir =
          (z.row(static_cast<Index>(i)) - z.row(static_cast<Index>(j))) * (scale * g_dz[q] / dz[q]);
      d_z->row(static_cast<Index>(i)) += dir;
      d_z->row(static_cast<Index>(j)) -= dir;
    }
  }
  return loss * inv_p;
}

double loss_contra(const RowMatrix& z, std::span<const std::size_t> cluster, double tau_con, RowMatrix* d_z,
                   double scale) {
  const auto n = static_cast<std::size_t>(z.rows());
  require(n >= 2, ErrorKind::kValidation, "contrastive loss needs a batch of at least 2");
  require(n == cluster.size(), ErrorKind::kShape, "cluster labels differ from batch size");
  require(tau_con > 0.0, ErrorKind::kValidation, "contrastive temperature must be positive");
  Eigen::VectorXd norms(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    norms[static_cast<Index>(i)] = z.row(static_cast<Index>(i)).norm();
    require(norms[static_cast<Index>(i)] > kNormGuard, ErrorKind::kEvaluation,
            "embedding " + std::to_string(i) + " has zero norm");
  }
  const RowMatrix unit = norms.cwiseInverse().asDiagonal() * z;
  const RowMatrix sim = (unit * unit.transpose()) / tau_con;

  std::size_t anchors = 0;
  double loss = 0.0;
  RowMatrix g_sim = RowMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
  std::vector<double> logits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t a = 0; a < n; ++a) positives += (a != i && cluster[a] == cluster[i]) ? 1 : 0;
    if (positives == 0) continue;
    ++anchors;
    logits.clear();
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) logits.push_back(sim(static_cast<Index>(i), static_cast<Index>(a)));
    }
    const double lse = numerics::log_sum_exp(logits);
    double pos_sum = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      const double s = sim(static_cast<Index>(i), static_cast<Index>(a));
      const bool positive = cluster[a] == cluster[i];
      if (positive) pos_sum += s;
      g_sim(static_cast<Index>(i), static_cast<Index>(a)) =
          std::exp(s - lse) - (positive ? 1.0 / static_cast<double>(positives) : 0.0);
    }
    loss += lse - pos_sum / static_cast<double>(positives);
  }
  if (anchors == 0) return 0.0;
  const double inv_anchors = 1.0 / static_cast<double>(anchors);
  if (d_z != nullptr) {
    // sim_ia = u_i . u_a / tau; both u_i and u_a receive gradient.
    g_sim *= scale * inv_anchors / tau_con;
    const RowMatrix d_unit = (g_sim + g_sim.transpose()) * unit;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Index>(i);
      const double proj = unit.row(ii).dot(d_unit.row(ii));
      d_z->row(ii) += (d_unit.row(ii) - proj * unit.row(ii)) / norms[ii];
    }
  }
  return loss * inv_anchors;
}

Tensor random_embeddings(std::size_t n, std::size_t d, double stddev, numerics::Rng& rng) {
  Tensor e({n, d});
  for (double& v : e.data()) v = stddev * rng.normal();
  return e;
}

EmbeddingModel train_embeddings(const Codebook& cb, std::span<const traj::Sample> samples,
                                const EmbedTrainConfig& config) {
  config.validate();
  require(!samples.empty(), ErrorKind::kValidation, "no samples to train embeddings on");
  const std::size_t n = cb.size();
  const std::size_t d = config.dim;
  numerics::Rng rng(config.seed, 0x656d62);

  std::span<const traj::Sample> used = samples;
  if (config.max_samples > 0 && config.max_samples < samples.size()) used = samples.first(config.max_samples);
  const std::vector<Waypoint> points = Codebook::pool(used, cb.representation());
  std::vector<std::size_t> hard(points.size());
  Waypoint mean{};
  for (std::size_t i = 0; i < points.size(); ++i) {
    hard[i] = cb.quantize(points[i]);
    mean.x += points[i].x;
    mean.y += points[i].y;
  }
  mean.x /= static_cast<double>(points.size());
  mean.y /= static_cast<double>(points.size());

  EmbeddingModel model;
  model.config = config;
  model.embeddings = random_embeddings(n, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  model.decoder = Decoder(d);
  model.decoder.init(rng, mean);

  std::vector<double> vel_e(n * d, 0.0), vel_dec(model.decoder.params().size(), 0.0);
  std::vector<double> grad_e(n * d), grad_dec(model.decoder.params().size());
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::size_t k = std::min(curriculum_k(epoch, config.epochs, config.k_start, config.k_end), n);
    rng.shuffle(std::span<std::size_t>(order));
    EpochLog log;
    log.epoch = epoch;
    log.k = k;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 3 <= order.size(); start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, order.size() - start);
      std::vector<Waypoint> w(b);
      std::vector<std::size_t> clusters(b);
      std::vector<SoftAssignment> sa(b);
      RowMatrix z(static_cast<Index>(b), static_cast<Index>(d));
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t idx = order[start + i];
        w[i] = points[idx];
        clusters[i] = hard[idx];
        sa[i] = soft_assign(w[i], cb, model.embeddings, k, config.tau);
        for (std::size_t c = 0; c < d; ++c) z(static_cast<Index>(i), static_cast<Index>(c)) = sa[i].z[c];
      }
      RowMatrix d_z = RowMatrix::Zero(z.rows(), z.cols());
      std::fill(grad_dec.begin(), grad_dec.end(), 0.0);
      const double recon = loss_recon(z, w, model.decoder, &d_z, grad_dec, config.lambda_recon);
      const double geom = config.lambda_geom > 0.0 ? loss_geom(z, w, &d_z, config.lambda_geom) : 0.0;
      const double contra =
          config.lambda_contra > 0.0 ? loss_contra(z, clusters, config.tau_con, &d_z, config.lambda_contra) : 0.0;
      const double total = config.lambda_recon * recon + config.lambda_geom * geom + config.lambda_contra * contra;
      if (!std::isfinite(total)) {
        fail(ErrorKind::kTraining, "embedding loss diverged in epoch " + std::to_string(epoch));
      }
      std::fill(grad_e.begin(), grad_e.end(), 0.0);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < sa[i].indices.size(); ++j) {
          double* row = grad_e.data() + sa[i].indices[j] * d;
          const double a = sa[i].weights[j];
          for (std::size_t c = 0; c < d; ++c) row[c] += a * d_z(static_cast<Index>(i), static_cast<Index>(c));
        }
      }
      auto e = model.embeddings.data();
      for (std::size_t i = 0; i < e.size(); ++i) {
        vel_e[i] = config.momentum * vel_e[i] + grad_e[i];
        e[i] -= config.learning_rate * vel_e[i];
      }
      auto& dec = model.decoder.params();
      for (std::size_t i = 0; i < dec.size(); ++i) {
        vel_dec[i] = config.momentum * vel_dec[i] + grad_dec[i];
        dec[i] -= config.learning_rate * vel_dec[i];
      }
      log.recon += recon;
      log.geom += geom;
      log.contra += contra;
      log.total += total;
      ++batches;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      log.recon *= inv;
      log.geom *= inv;
      log.contra *= inv;
      log.total *= inv;
    }
    model.log.push_back(log);
  }
  return model;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::kValidation, "spearman needs two equal series");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double x = ra[i] - mean;
    const double y = rb[i] - mean;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double metric_alignment_score(const Tensor& embeddings, const Codebook& cb) {
  require(embeddings.rows() == cb.size(), ErrorKind::kShape, "embedding rows differ from codebook size");
  const std::size_t n = cb.size();
  const auto e = embeddings.as_matrix();
  std::vector<double> de, dc;
  de.reserve(n * (n - 1) / 2);
  dc.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Waypoint ci = cb.dequantize(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Waypoint cj = cb.dequantize(j);
      de.push_back((e.row(static_cast<Index>(i)) - e.row(static_cast<Index>(j))).norm());
      dc.push_back(std::hypot(ci.x - cj.x, ci.y - cj.y));
    }
  }
  return spearman(de, dc);
}

std::string to_json(const EmbeddingModel& m) {
  const auto& c = m.config;
  const json cfg = {{"dim", c.dim},
                    {"k_start", c.k_start},
                    {"k_end", c.k_end},
                    {"tau", c.tau},
                    {"tau_con", c.tau_con},
                    {"lambda_recon", c.lambda_recon},
                    {"lambda_geom", c.lambda_geom},
                    {"lambda_contra", c.lambda_contra},
                    {"epochs", c.epochs},
                    {"batch_size", c.batch_size},
                    {"learning_rate", c.learning_rate},
                    {"momentum", c.momentum},
                    {"seed", c.seed},
                    {"max_samples", c.max_samples}};
  const auto e = m.embeddings.data();
  const json j = {{"version", kEmbeddingVersion},
                  {"n", m.n()},
                  {"d", m.d()},
                  {"E", std::vector<double>(e.begin(), e.end())},
                  {"decoder", {{"hidden", m.decoder.hidden()}, {"params", m.decoder.params()}}},
                  {"config", cfg}};
  return j.dump() + "\n";
}

EmbeddingModel embedding_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("corrupt embedding file: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    require(version == kEmbeddingVersion, ErrorKind::kFormat,
            "embedding version " + std::to_string(version) + " is not supported");
    const auto n = j.at("n").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    auto values = j.at("E").get<std::vector<double>>();
    require(values.size() == n * d, ErrorKind::kFormat, "embedding matrix size does not match n x d");
    EmbeddingModel m;
    m.embeddings = Tensor({n, d}, std::move(values));
    m.decoder = Decoder(d, j.at("decoder").at("hidden").get<std::size_t>());
    auto params = j.at("decoder").at("params").get<std::vector<double>>();
    require(params.size() == m.decoder.params().size(), ErrorKind::kFormat, "decoder parameter count mismatch");
    m.decoder.params() = std::move(params);
    const auto& c = j.at("config");
    m.config.dim = c.at("dim").get<std::size_t>();
    m.config.k_start = c.at("k_start").get<std::size_t>();
    m.config.k_end = c.at("k_end").get<std::size_t>();
    m.config.tau = c.at("tau").get<double>();
    m.config.tau_con = c.at("tau_con").get<double>();
    m.config.lambda_recon = c.at("lambda_recon").get<double>();
    m.config.lambda_geom = c.at("lambda_geom").get<double>();
    m.config.lambda_contra = c.at("lambda_contra").get<double>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.momentum = c.at("momentum").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.max_samples = c.at("max_samples").get<std::size_t>();
    require(m.embeddings.all_finite(), ErrorKind::kFormat, "embedding matrix contains non-finite values");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("corrupt embedding file: ") + e.what());
  }
}

void save_embedding(const EmbeddingModel& m, const std::string& path) { write_file(path, to_json(m)); }

EmbeddingModel load_embedding(const std::string& path) { return embedding_from_json(read_file(path)); }

std::string log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,k,recon_loss,geom_loss,contra_loss,total_loss\n";
  for (const auto& l : log) {
    out << l.epoch << ',' << l.k << ',' << l.recon << ',' << l.geom << ',' << l.contra << ',' << l.total << '\n';
  }
  return out.str();
}

}  // namespace mvlad::embed
