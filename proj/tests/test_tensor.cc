// tests/test_tensor.cc

// Copyright 2026  enkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enkit/tape.h"
#include "enkit/tensor.h"
#include "testutil.h"

using enkit::ContractError;
using enkit::DimensionError;
using enkit::NumericError;
using enkit::Rng;
using enkit::Tape;
using enkit::Tensor;
using enkit::test::finite_difference_max_rel_err;
using enkit::test::random_tensor;

TEST_CASE("tensor shape and data invariants") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6.0);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, NAN}), NumericError);
}

TEST_CASE("matmul identity and hand arithmetic") {
  Tape tape;
  Tensor x = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  Tensor out = tape.matmul(Tensor::eye(2), x);
  for (int i = 0; i < 4; ++i)
    CHECK(out.data()[static_cast<std::size_t>(i)] ==
          x.data()[static_cast<std::size_t>(i)]);

  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 1}, {1, 1});
  Tensor c = tape.matmul(a, b);
  CHECK(c.at(0, 0) == 3.0);
  CHECK(c.at(1, 0) == 7.0);

  CHECK_THROWS_AS(tape.matmul(a, Tensor::from_data({3, 1}, {1, 1, 1})),
                  DimensionError);
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(7);
  Tensor a = random_tensor({3, 4}, rng, 1.0, true);
  Tensor b = random_tensor({4, 2}, rng, 1.0, true);
  std::vector<Tensor> params = {a, b};
  auto loss = [&](Tape& t) {
    Tensor c = t.matmul(a, b);
    return t.sum(t.mul(c, c));
  };
  CHECK(finite_difference_max_rel_err(loss, params) < 1e-6);
}

TEST_CASE("elementwise basics") {
  Tape tape;
  CHECK(tape.sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5));
  Tensor x = Tensor::scalar(-3.0, true);
  Tensor y = tape.relu(x);
  CHECK(y.item() == 0.0);
  tape.backward(y);
  CHECK(tape.grad(x).item() == 0.0);

  CHECK_THROWS_AS(tape.log(Tensor::scalar(0.0)), NumericError);
  CHECK_THROWS_AS(tape.log(Tensor::scalar(-1.0)), NumericError);
  CHECK_THROWS_AS(tape.div(Tensor::scalar(1.0), Tensor::scalar(0.0)),
                  NumericError);
  CHECK_THROWS_AS(
      tape.add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
}

TEST_CASE("tanh gradient against finite differences") {
  Rng rng(11);
  Tensor x = random_tensor({6}, rng, 2.0, true);
  std::vector<Tensor> params = {x};
  auto loss = [&](Tape& t) { return t.sum(t.tanh(x)); };
  CHECK(finite_difference_max_rel_err(loss, params) < 1e-6);
}

TEST_CASE("every differentiable op passes a finite-difference check") {
  // Ten seeds over a composite graph touching each op once.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Tensor m = random_tensor({3, 5}, rng, 1.0, true);
    Tensor w = random_tensor({3, 3}, rng, 0.7, true);
    Tensor v = random_tensor({3}, rng, 0.8, true);
    Tensor s = random_tensor({1}, rng, 0.5, true);
    std::vector<Tensor> params = {m, w, v, s};
    auto loss = [&](Tape& t) {
      Tensor sp = t.splice(m, {-1, 0, 1});  // [9 x 3]
      Tensor a = t.matmul(w, t.slice_cols(t.transpose(sp), 0, 3));  // [3 x 3]
      Tensor b = t.add(a, t.broadcast_cols(v, 3));
      Tensor c = t.scale_rows(t.tanh(b), t.relu(v));
      Tensor sm = t.softmax_rows(c);
      auto [mean, sd] = t.mean_std_over_time(t.add(sm, t.exp(b)), std::nullopt);
      Tensor cat = t.concat_vec({mean, sd});
      Tensor stacked = t.stack_rows({mean, sd, t.row(c, 1)});
      Tensor tr = t.transpose(stacked);
      Tensor prod = t.matmul(tr, stacked);  // [3 x 3]
      Tensor mixed =
          t.sub(t.mul(prod, prod), t.div(prod, t.offset(t.sigmoid(prod), 2.0)));
      Tensor scal =
          t.add(t.scale(t.sum(mixed), 0.3),
                t.mul(s, t.pick(cat, 2)));
      Tensor lg = t.log(t.offset(t.sqrt(t.offset(t.relu(scal), 1.0)), 1.0));
      Tensor rs = t.sum(t.row_sum(t.concat_cols({prod, stacked})));
      return t.sum_list({lg, t.scale(rs, 0.01), t.dot(v, mean)});
    };
    CAPTURE(seed);
    CHECK(finite_difference_max_rel_err(loss, params) < 1e-4);
  }
}

TEST_CASE("softmax rows: uniformity, hand value, normalization, shift") {
  Tape tape;
  Tensor equal = Tensor::from_data({1, 4}, {2.5, 2.5, 2.5, 2.5});
  Tensor u = tape.softmax_rows(equal);
  for (int j = 0; j < 4; ++j) CHECK(u.at(0, j) == doctest::Approx(0.25));

  Tensor x = Tensor::from_data({1, 2}, {0.0, std::log(2.0)});
  Tensor y = tape.softmax_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(y.at(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  Rng rng(3);
  Tensor r = random_tensor({4, 7}, rng, 5.0);
  Tensor sm = tape.softmax_rows(r);
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 7; ++j) s += sm.at(i, j);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  // shift invariance
  Tensor shifted = tape.offset(r, 17.25);
  Tensor sm2 = tape.softmax_rows(shifted);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 7; ++j)
      CHECK(std::abs(sm.at(i, j) - sm2.at(i, j)) < 1e-12);
}

TEST_CASE("softmax gradient against finite differences") {
  Rng rng(19);
  Tensor x = random_tensor({2, 5}, rng, 2.0, true);
  Tensor w = random_tensor({2, 5}, rng, 1.0);
  std::vector<Tensor> params = {x};
  auto loss = [&](Tape& t) { return t.sum(t.mul(t.softmax_rows(x), w)); };
  CHECK(finite_difference_max_rel_err(loss, params) < 1e-5);
}

TEST_CASE("mean_std_over_time contracts") {
  Tape tape;
  // constant columns -> (c, 0)
  Tensor m = Tensor::from_data({2, 4}, {3, 3, 3, 3, -1, -1, -1, -1});
  auto [mean, sd] = tape.mean_std_over_time(m);
  CHECK(mean.at(0) == doctest::Approx(3.0));
  CHECK(mean.at(1) == doctest::Approx(-1.0));
  CHECK(sd.at(0) == 0.0);
  CHECK(sd.at(1) == 0.0);

  // T = 1 -> (m1, 0)
  Tensor one = Tensor::from_data({3, 1}, {4, 5, 6});
  auto [m1, s1] = tape.mean_std_over_time(one);
  CHECK(m1.at(2) == 6.0);
  CHECK(s1.at(0) == 0.0);
  CHECK(s1.at(1) == 0.0);
  CHECK(s1.at(2) == 0.0);

  // uniform weights equal the unweighted statistics
  Rng rng(5);
  Tensor r = random_tensor({3, 6}, rng, 2.0);
  Tensor w = Tensor::full({6}, 1.0 / 6.0);
  auto [mu_u, sd_u] = tape.mean_std_over_time(r);
  auto [mu_w, sd_w] = tape.mean_std_over_time(r, w);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(mu_u.at(i) - mu_w.at(i)) < 1e-12);
    CHECK(std::abs(sd_u.at(i) - sd_w.at(i)) < 1e-12);
  }

  CHECK_THROWS_AS(tape.mean_std_over_time(Tensor::zeros({3, 0})),
                  enkit::Error);
  Tensor bad_w = Tensor::from_data({6}, {0.5, 0.5, 0.5, 0.1, 0.1, 0.1});
  CHECK_THROWS_AS(tape.mean_std_over_time(r, bad_w), ContractError);
}

TEST_CASE("mean_std_over_time gradient including weights") {
  Rng rng(23);
  Tensor m = random_tensor({4, 5}, rng, 1.5, true);
  Tensor raw = random_tensor({1, 5}, rng, 1.0, true);
  std::vector<Tensor> params = {m, raw};
  auto loss = [&](Tape& t) {
    Tensor w = t.row(t.softmax_rows(raw), 0);
    auto [mean, sd] = t.mean_std_over_time(m, w);
    return t.add(t.sum(t.mul(mean, mean)), t.sum(sd));
  };
  CHECK(finite_difference_max_rel_err(loss, params) < 1e-4);
}

TEST_CASE("splice layout and length arithmetic") {
  Tape tape;
  // offsets {0} -> identity
  Rng rng(2);
  Tensor x = random_tensor({2, 10}, rng, 1.0);
  Tensor id = tape.splice(x, {0});
  CHECK(id.rows() == 2);
  CHECK(id.cols() == 10);
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 10; ++t) CHECK(id.at(i, t) == x.at(i, t));

  // T=10, offsets [-2..2] -> T' = 6
  Tensor sp = tape.splice(x, {-2, -1, 0, 1, 2});
  CHECK(sp.rows() == 10);
  CHECK(sp.cols() == 6);

  // T=15, offsets {-3,0,3}: T'=9, column 0 stacks frames 0, 3, 6
  Tensor y = Tensor::zeros({1, 15});
  for (int t = 0; t < 15; ++t) y.set(0, t, static_cast<double>(t));
  Tensor spliced = tape.splice(y, {-3, 0, 3});
  CHECK(spliced.rows() == 3);
  CHECK(spliced.cols() == 9);
  CHECK(spliced.at(0, 0) == 0.0);
  CHECK(spliced.at(1, 0) == 3.0);
  CHECK(spliced.at(2, 0) == 6.0);

  CHECK_THROWS_AS(tape.splice(Tensor::zeros({2, 4}), {-2, 0, 2}),
                  ContractError);
}

TEST_CASE("tape backward basics") {
  Tape tape;
  Tensor w = Tensor::from_data({4}, {1, -2, 3, 0.5}, true);

  SUBCASE("loss = sum(w) gives all-ones gradient") {
    Tensor loss = tape.sum(w);
    tape.backward(loss);
    Tensor g = tape.grad(w);
    for (int i = 0; i < 4; ++i) CHECK(g.at(i) == 1.0);
  }

  SUBCASE("loss = w'w gives 2w") {
    Tensor loss = tape.dot(w, w);
    tape.backward(loss);
    Tensor g = tape.grad(w);
    for (int i = 0; i < 4; ++i) CHECK(g.at(i) == doctest::Approx(2.0 * w.at(i)));
  }

  SUBCASE("non-scalar loss is a contract error") {
    Tensor y = tape.mul(w, w);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
}

TEST_CASE("gradient accumulation is linear over consumers") {
  // A tensor feeding two consumers receives the sum of both contributions.
  Tensor x = Tensor::from_data({3}, {0.5, -1.0, 2.0}, true);

  Tape joint;
  Tensor both = joint.add(joint.sum(joint.mul(x, x)), joint.sum(x));
  joint.backward(both);
  Tensor g_joint = joint.grad(x);

  Tape t1;
  t1.backward(t1.sum(t1.mul(x, x)));
  Tensor g1 = t1.grad(x);
  Tape t2;
  t2.backward(t2.sum(x));
  Tensor g2 = t2.grad(x);

  for (int i = 0; i < 3; ++i)
    CHECK(g_joint.at(i) == doctest::Approx(g1.at(i) + g2.at(i)).epsilon(1e-14));
}

TEST_CASE("tape resets after backward") {
  Tape tape;
  Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor loss = tape.sum(w);
  CHECK(tape.num_nodes() > 0);
  tape.backward(loss);
  CHECK(tape.num_nodes() == 0);
  CHECK(tape.grad(w).at(0) == 1.0);
}
