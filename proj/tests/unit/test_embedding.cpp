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

#include <cmath>

#include "core/error.hpp"
#include "doctest.h"
#include "geo_embedding/embedding.hpp"
#include "helpers.hpp"
#include "numerics/grad_check.hpp"

using namespace mvlad;
using namespace mvlad::embed;
using mvlad::testing::make_codebook;
using mvlad::testing::make_samples;
using mvlad::testing::TempDir;
using numerics::grad_check;
using numerics::Objective;
using numerics::ValueAndGrad;

namespace {

Codebook grid_codebook() {
  std::vector<Waypoint> cs;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) cs.push_back({3.0 * i, 4.0 * j});
  }
  return Codebook(cs, codebook::Representation::kWaypoint, {});
}

RowMatrix random_matrix(std::size_t rows, std::size_t cols, numerics::Rng& rng) {
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<Waypoint> random_points(std::size_t n, numerics::Rng& rng) {
  std::vector<Waypoint> w(n);
  for (auto& p : w) p = {rng.uniform(-10, 10), rng.uniform(0, 40)};
  return w;
}

// Wraps a z-gradient loss as an objective over the flattened batch.
Objective over_z(std::size_t rows, std::size_t cols, std::function<double(const RowMatrix&, RowMatrix*)> loss) {
  return [=](std::span<const double> flat) {
    const RowMatrix z = numerics::ConstMatrixMap(flat.data(), static_cast<Eigen::Index>(rows),
                                                 static_cast<Eigen::Index>(cols));
    RowMatrix dz = RowMatrix::Zero(z.rows(), z.cols());
    ValueAndGrad r;
    r.value = loss(z, &dz);
    r.grad.assign(dz.data(), dz.data() + dz.size());
    return r;
  };
}

std::vector<double> flat(const RowMatrix& m) { return {m.data(), m.data() + m.size()}; }

}  // namespace

TEST_CASE("curriculum follows the linear rounded rule") {
  std::vector<std::size_t> ks;
  for (std::size_t e = 0; e < 8; ++e) ks.push_back(curriculum_k(e, 8, 16, 1));
  // round(16 - 15 e / 7), computed by hand.
  CHECK(ks == std::vector<std::size_t>{16, 14, 12, 10, 7, 5, 3, 1});
  CHECK(ks.front() == 16);
  CHECK(ks.back() == 1);
  CHECK(curriculum_k(0, 1, 16, 1) == 16);
}

TEST_CASE("config validation") {
  EmbedTrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.k_end = 20;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.lambda_geom = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("soft assignment") {
  const Codebook cb = grid_codebook();
  numerics::Rng rng(2);
  const Tensor e = random_embeddings(cb.size(), 5, 1.0, rng);

  const auto one = soft_assign({3.2, 4.1}, cb, e, 1, 0.5);
  CHECK(one.weights == std::vector<double>{1.0});
  const auto row = e.row(cb.quantize({3.2, 4.1}));
  CHECK(std::equal(one.z.begin(), one.z.end(), row.begin()));

  const auto two = soft_assign({1.5, 0.0}, cb, e, 2, 0.5);
  CHECK(two.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two.weights[1] == doctest::Approx(0.5).epsilon(1e-15));

  const Waypoint w{4.3, 6.9};
  const auto four = soft_assign(w, cb, e, 4, 0.7);
  double denom = 0.0;
  std::vector<double> raw;
  for (std::size_t j : four.indices) {
    const Waypoint c = cb.dequantize(j);
    raw.push_back(std::exp(-std::hypot(w.x - c.x, w.y - c.y) / 0.7));
    denom += raw.back();
  }
  for (std::size_t j = 0; j < 4; ++j) CHECK(four.weights[j] == doctest::Approx(raw[j] / denom).epsilon(1e-14));
  CHECK(four.indices == cb.nearest(w, 4));
  CHECK_THROWS_AS(soft_assign(w, cb, e, 17, 0.7), Error);
}

TEST_CASE("decoder") {
  Decoder dec(4);
  const std::vector<double> z = {0.3, -1.0, 2.0, 0.1};
  CHECK(dec.forward(z) == Waypoint{0.0, 0.0});
  numerics::Rng rng(3);
  dec.init(rng, {1.0, 2.0});
  CHECK(dec.forward(z) == dec.forward(z));

  // Two-wide toy, gradient over the parameters.
  Decoder toy(2, 3);
  numerics::Rng r2(4);
  toy.init(r2, {0.5, -0.5});
  const RowMatrix zb = random_matrix(5, 2, r2);
  const auto w = random_points(5, r2);
  const Objective f = [&](std::span<const double> p) {
    Decoder d = toy;
    d.params().assign(p.begin(), p.end());
    ValueAndGrad res;
    res.grad.assign(p.size(), 0.0);
    res.value = loss_recon(zb, w, d, nullptr, res.grad);
    return res;
  };
  CHECK(grad_check(f, toy.params()).max_rel_error <= 1e-4);
}

TEST_CASE("reconstruction loss values and gradients") {
  numerics::Rng rng(5);
  Decoder dec(6, 16);
  const RowMatrix z = random_matrix(4, 6, rng);
  const RowMatrix out = dec.forward(z);  // zero decoder: outputs (0, 0)
  std::vector<Waypoint> target(4, Waypoint{0.0, 0.0});
  CHECK(loss_recon(z, target, dec, nullptr, {}) == 0.0);
  std::vector<Waypoint> off(4, Waypoint{-3.0, -4.0});
  CHECK(loss_recon(z, off, dec, nullptr, {}) == doctest::Approx(25.0));

  dec.init(rng, {1.0, 5.0});
  const auto w = random_points(4, rng);
  const auto obj = over_z(4, 6, [&](const RowMatrix& zz, RowMatrix* dz) {
    return loss_recon(zz, w, dec, dz, {});
  });
  CHECK(grad_check(obj, flat(z)).max_rel_error <= 1e-4);
}

TEST_CASE("geometry loss values and gradients") {
  numerics::Rng rng(6);
  // Isometry at any scale: zero.
  const std::vector<Waypoint> w = {{0, 0}, {3, 4}, {6, 0}, {1, 9}};
  RowMatrix iso = RowMatrix::Zero(4, 3);
  for (int i = 0; i < 4; ++i) {
    iso(i, 0) = 7.0 * w[i].y;
    iso(i, 2) = -7.0 * w[i].x;
  }
  CHECK(loss_geom(iso, w, nullptr) == doctest::Approx(0.0).epsilon(1e-12));

  // Three points by hand: pair distances and medians.
  const std::vector<Waypoint> w3 = {{0, 0}, {3, 4}, {0, 8}};
  RowMatrix z3(3, 2);
  z3 << 0, 0, 1, 0, 0, 3;
  const double dz[3] = {1.0, 3.0, std::sqrt(10.0)};
  const double dw[3] = {5.0, 8.0, 5.0};
  const double mz = 3.0, mw = 5.0;
  double expect = 0.0;
  for (int q = 0; q < 3; ++q) expect += std::pow(dz[q] / mz - dw[q] / mw, 2);
  CHECK(loss_geom(z3, w3, nullptr) == doctest::Approx(expect / 3.0).epsilon(1e-14));

  // Degenerate batch.
  const std::vector<Waypoint> same(3, Waypoint{2, 2});
  CHECK(loss_geom(RowMatrix::Ones(3, 2), same, nullptr) == 0.0);
  CHECK_THROWS_AS(loss_geom(RowMatrix::Ones(2, 2), std::vector<Waypoint>(2), nullptr), Error);

  const auto wr = random_points(9, rng);
  const RowMatrix z = random_matrix(9, 5, rng);
  const auto obj = over_z(9, 5, [&](const RowMatrix& zz, RowMatrix* g) { return loss_geom(zz, wr, g); });
  CHECK(grad_check(obj, flat(z)).max_rel_error <= 1e-4);
}

TEST_CASE("contrastive loss values and gradients") {
  numerics::Rng rng(7);
  const RowMatrix z = random_matrix(6, 4, rng);
  const std::vector<std::size_t> own = {0, 1, 2, 3, 4, 5};
  CHECK(loss_contra(z, own, 0.1, nullptr) == 0.0);

  // Hand-set unit vectors; anchors 0 and 1 share a cluster.
  RowMatrix u(3, 2);
  u << 1, 0, 0.6, 0.8, 0, -1;
  const std::vector<std::size_t> labels = {7, 7, 2};
  const double tau = 0.5;
  const double s01 = 0.6 / tau, s02 = 0.0 / tau, s12 = -0.8 / tau;
  const double l0 = -std::log(std::exp(s01) / (std::exp(s01) + std::exp(s02)));
  const double l1 = -std::log(std::exp(s01) / (std::exp(s01) + std::exp(s12)));
  CHECK(loss_contra(u, labels, tau, nullptr) == doctest::Approx((l0 + l1) / 2.0).epsilon(1e-14));
  // Scaling rows does not matter after normalization.
  RowMatrix scaled = u;
  scaled.row(1) *= 5.0;
  CHECK(loss_contra(scaled, labels, tau, nullptr) == doctest::Approx((l0 + l1) / 2.0).epsilon(1e-14));

  RowMatrix zero = u;
  zero.row(2).setZero();
  CHECK_THROWS_AS(loss_contra(zero, labels, tau, nullptr), Error);

  const std::vector<std::size_t> mixed = {0, 1, 0, 2, 1, 0};
  const auto obj = over_z(6, 4, [&](const RowMatrix& zz, RowMatrix* g) { return loss_contra(zz, mixed, 0.3, g); });
  CHECK(grad_check(obj, flat(z)).max_rel_error <= 1e-4);
}

TEST_CASE("spearman and alignment") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {10, 20, 30, 40, 50};
  const std::vector<double> c = {5, 4, 3, 2, 1};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  CHECK(spearman(a, c) == doctest::Approx(-1.0));
  // Ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
  const std::vector<double> t = {1, 1, 2};
  const std::vector<double> u = {1, 2, 3};
  CHECK(spearman(t, u) == doctest::Approx(std::sqrt(3.0) / 2.0));

  const Codebook cb = grid_codebook();
  Tensor padded({cb.size(), 8});
  for (std::size_t i = 0; i < cb.size(); ++i) {
    padded(i, 0) = cb.centroids()[i].x;
    padded(i, 1) = cb.centroids()[i].y;
  }
  CHECK(metric_alignment_score(padded, cb) == doctest::Approx(1.0));
}

TEST_CASE("random embeddings are not aligned") {
  const auto samples = make_samples(2000, 1);
  const Codebook cb = make_codebook(samples, 256, 1);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    numerics::Rng rng(seed, 4);
    worst = std::max(worst, std::abs(metric_alignment_score(random_embeddings(256, 64, 0.125, rng), cb)));
  }
  CHECK(worst < 0.2);
}

TEST_CASE("reconstruction alone decreases over the first epochs") {
  const auto samples = make_samples(170, 2);  // about 1k waypoints
  const Codebook cb = make_codebook(samples, 32, 2);
  EmbedTrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  cfg.lambda_geom = 0.0;
  cfg.lambda_contra = 0.0;
  cfg.seed = 3;
  const EmbeddingModel m = train_embeddings(cb, samples, cfg);
  REQUIRE(m.log.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(m.log[e].recon < m.log[e - 1].recon);
}

TEST_CASE("trained embeddings align with geometry and round trip") {
  const auto samples = make_samples(1500, 3);
  const Codebook cb = make_codebook(samples, 64, 3);
  EmbedTrainConfig cfg;
  cfg.dim = 32;
  cfg.seed = 5;
  const EmbeddingModel m = train_embeddings(cb, samples, cfg);
  CHECK(m.log.size() == 8);
  CHECK(m.embeddings.all_finite());
  for (std::size_t i = 0; i < m.n(); ++i) {
    bool nonzero = false;
    for (double v : m.embeddings.row(i)) nonzero = nonzero || v != 0.0;
    CHECK(nonzero);
  }
  CHECK(metric_alignment_score(m.embeddings, cb) >= 0.8);

  const EmbeddingModel again = train_embeddings(cb, samples, cfg);
  CHECK(again.embeddings == m.embeddings);

  TempDir dir("emb");
  save_embedding(m, dir.file("e.json"));
  const EmbeddingModel back = load_embedding(dir.file("e.json"));
  CHECK(back.embeddings == m.embeddings);
  CHECK(back.decoder == m.decoder);
  CHECK(to_json(back) == to_json(m));
  const std::string csv = log_csv(m.log);
  CHECK(csv.rfind("epoch,k,recon_loss,geom_loss,contra_loss,total_loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);

  std::string text = to_json(m);
  CHECK_THROWS_AS(embedding_from_json(text.substr(0, 100)), Error);
}

TEST_CASE("invariances") {
  numerics::Rng rng(8);
  const Codebook cb = grid_codebook();
  const Tensor e = random_embeddings(cb.size(), 6, 1.0, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Waypoint w{rng.uniform(-2, 12), rng.uniform(-2, 16)};
    const auto sa = soft_assign(w, cb, e, 5, 0.5);
    double sum = 0.0;
    for (double v : sa.weights) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  const auto cold = soft_assign({1.0, 1.0}, cb, e, 4, 1e-4);
  CHECK(cold.weights[0] == doctest::Approx(1.0));
  CHECK(cold.indices[0] == cb.quantize({1.0, 1.0}));

  const auto w = random_points(10, rng);
  const RowMatrix z = random_matrix(10, 4, rng);
  CHECK(std::abs(loss_geom(z, w, nullptr) - loss_geom(z * 13.7, w, nullptr)) <= 1e-9);

  const std::vector<std::size_t> labels = {0, 0, 1, 1, 2, 0, 1, 2, 2, 0};
  RowMatrix scaled = z;
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= 0.1 + static_cast<double>(i);
  CHECK(std::abs(loss_contra(z, labels, 0.1, nullptr) - loss_contra(scaled, labels, 0.1, nullptr)) <= 1e-9);

  Tensor big = e;
  for (double& v : big.data()) v *= 42.0;
  CHECK(metric_alignment_score(big, cb) == doctest::Approx(metric_alignment_score(e, cb)).epsilon(1e-12));
}
