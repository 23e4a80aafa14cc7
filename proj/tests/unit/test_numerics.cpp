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
#include <numeric>
#include <set>

#include "core/error.hpp"
#include "doctest.h"
#include "numerics/attention.hpp"
#include "numerics/grad_check.hpp"
#include "numerics/rng.hpp"
#include "numerics/tensor.hpp"

using namespace mvlad;
using namespace mvlad::numerics;

TEST_CASE("rng is reproducible and streams differ") {
  Rng a(42), b(42), c(42, 1);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  Rng d(42);
  d.set_counter(100);
  CHECK(d == a);
  Rng e = a.split(7), f = a.split(7);
  CHECK(e.next_u64() == f.next_u64());
}

TEST_CASE("rng distributions") {
  Rng rng(1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, usum = 0.0;
  std::vector<int> hist(6, 0);
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    usum += u;
    ++hist[rng.below(6)];
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  CHECK(std::abs(usum / n - 0.5) < 0.005);
  for (int h : hist) CHECK(std::abs(h / double(n) - 1.0 / 6.0) < 0.005);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span<int>(v));
  CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
  CHECK_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("tensor shapes and softmax") {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 1000, 1000, 1000});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t(1, 2) == 1000);
  const Tensor p = softmax_rows(t);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK(p(1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(p.all_finite());
  CHECK_THROWS_AS(softmax_rows(Tensor({6})), Error);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(Tensor({4}).rows(), Error);
  const std::vector<double> row = {0.0, std::log(3.0)};
  CHECK(log_sum_exp(row) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("grad_check agrees on a known function and flags a wrong one") {
  const Objective good = [](std::span<const double> x) {
    ValueAndGrad r;
    r.value = std::sin(x[0]) * x[1] + x[1] * x[1] * x[1];
    r.grad = {std::cos(x[0]) * x[1], std::sin(x[0]) + 3.0 * x[1] * x[1]};
    return r;
  };
  const std::vector<double> x = {0.3, -1.2};
  CHECK(grad_check(good, x).max_rel_error < 1e-8);
  const Objective bad = [&](std::span<const double> p) {
    auto r = good(p);
    r.grad[1] += 0.01;
    return r;
  };
  const auto res = grad_check(bad, x);
  CHECK(res.max_rel_error > 1e-3);
  CHECK(res.worst_index == 1);
  const Objective nan = [](std::span<const double>) { return ValueAndGrad{std::nan(""), {0.0}}; };
  CHECK_THROWS_AS(grad_check(nan, std::vector<double>{1.0}), Error);
}

TEST_CASE("attention block gradients match finite differences") {
  Rng rng(11);
  const BlockShape shape{8, 2, 16};
  AttentionBlock block(shape, rng);
  const std::size_t seq = 5;
  Tensor x({seq, shape.width});
  for (double& v : x.data()) v = rng.normal();
  Tensor w({seq, shape.width});
  for (double& v : w.data()) v = rng.normal();

  // Loss = sum(block(x) .* w), checked against the parameters and the input.
  const Objective params_obj = [&](std::span<const double> p) {
    AttentionBlock b = block;
    b.params().assign(p.begin(), p.end());
    const Tensor y = b.forward(x);
    ValueAndGrad r;
    for (std::size_t i = 0; i < y.size(); ++i) r.value += y[i] * w[i];
    b.backward(x, w, r.grad);
    return r;
  };
  CHECK(grad_check(params_obj, block.params()).max_rel_error <= 1e-4);

  const Objective input_obj = [&](std::span<const double> xs) {
    const Tensor in({seq, shape.width}, std::vector<double>(xs.begin(), xs.end()));
    const Tensor y = block.forward(in);
    std::vector<double> pg;
    ValueAndGrad r;
    for (std::size_t i = 0; i < y.size(); ++i) r.value += y[i] * w[i];
    const Tensor dx = block.backward(in, w, pg);
    r.grad.assign(dx.data().begin(), dx.data().end());
    return r;
  };
  CHECK(grad_check(input_obj, x.data()).max_rel_error <= 1e-4);
}

TEST_CASE("attention is bidirectional") {
  Rng rng(5);
  AttentionBlock block({8, 2, 16}, rng);
  Tensor x({4, 8});
  for (double& v : x.data()) v = rng.normal();
  const Tensor y0 = block.forward(x);
  Tensor x2 = x;
  x2(3, 0) += 1.0;  // perturb the last position
  const Tensor y1 = block.forward(x2);
  CHECK(y0(0, 0) != y1(0, 0));  // the first position sees it
}

TEST_CASE("width must divide into heads") {
  Rng rng(1);
  CHECK_THROWS_AS(AttentionBlock({10, 4, 8}, rng), Error);
}
