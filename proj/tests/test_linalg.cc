// tests/test_linalg.cc

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

#include "enkit/linalg.h"
#include "testutil.h"

using enkit::NumericError;
using enkit::Rng;
using enkit::Tensor;
using enkit::test::random_tensor;

namespace {

Tensor random_spd(int n, Rng& rng) {
  Tensor m = random_tensor({n, n}, rng, 1.0);
  Tensor mmt = enkit::mat_mul(m, enkit::mat_transpose(m));
  return enkit::mat_add(mmt, Tensor::eye(n));
}

double residual_inf_norm(const Tensor& a, const Tensor& x, const Tensor& b) {
  Tensor ax = enkit::mat_mul(a, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < ax.data().size(); ++i)
    worst = std::max(worst, std::abs(ax.data()[i] - b.data()[i]));
  return worst;
}

double inf_norm(const Tensor& m) {
  double worst = 0.0;
  for (double v : m.data()) worst = std::max(worst, std::abs(v));
  return worst;
}

}  // namespace

TEST_CASE("cholesky solve trivial systems") {
  Rng rng(1);
  Tensor b = random_tensor({4, 2}, rng, 3.0);
  Tensor x_id = enkit::cholesky_solve(Tensor::eye(4), b);
  for (std::size_t i = 0; i < b.data().size(); ++i)
    CHECK(x_id.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-14));

  Tensor two_i = enkit::mat_scale(Tensor::eye(4), 2.0);
  Tensor x_half = enkit::cholesky_solve(two_i, b);
  for (std::size_t i = 0; i < b.data().size(); ++i)
    CHECK(x_half.data()[i] == doctest::Approx(b.data()[i] / 2.0));
}

TEST_CASE("cholesky solve residual bound on random SPD systems") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 100);
    int n = 2 + static_cast<int>(rng.uniform_int(0, 62));
    Tensor a = random_spd(n, rng);
    Tensor b = random_tensor({n, 3}, rng, 2.0);
    Tensor x = enkit::cholesky_solve(a, b);
    CAPTURE(seed);
    CAPTURE(n);
    CHECK(residual_inf_norm(a, x, b) < 1e-8 * std::max(1.0, inf_norm(b)));
  }
}

TEST_CASE("cholesky rejects non-SPD input") {
  Tensor bad = Tensor::from_data({2, 2}, {1.0, 2.0, 2.0, 1.0});  // eig -1, 3
  CHECK_THROWS_AS(enkit::cholesky_factor(bad), NumericError);
}

TEST_CASE("jacobi eigensolver on diagonal and hand cases") {
  Tensor d = Tensor::from_data({3, 3}, {5, 0, 0, 0, -1, 0, 0, 0, 2});
  auto [evals, evecs] = enkit::sym_eig_jacobi(d);
  CHECK(evals.at(0) == doctest::Approx(5.0));
  CHECK(evals.at(1) == doctest::Approx(2.0));
  CHECK(evals.at(2) == doctest::Approx(-1.0));
  // eigenvector columns are signed unit basis vectors
  for (int k = 0; k < 3; ++k) {
    double mx = 0.0;
    for (int i = 0; i < 3; ++i) mx = std::max(mx, std::abs(evecs.at(i, k)));
    CHECK(mx == doctest::Approx(1.0));
  }

  Tensor two = Tensor::from_data({2, 2}, {2, 1, 1, 2});
  auto [ev2, V2] = enkit::sym_eig_jacobi(two);
  CHECK(ev2.at(0) == doctest::Approx(3.0));
  CHECK(ev2.at(1) == doctest::Approx(1.0));
}

TEST_CASE("jacobi reconstruction and orthonormality on random matrices") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 500);
    int n = 2 + static_cast<int>(rng.uniform_int(0, 62));
    Tensor a = enkit::symmetrize(random_tensor({n, n}, rng, 1.0));
    auto [evals, v] = enkit::sym_eig_jacobi(a);

    // descending order
    for (int i = 1; i < n; ++i) CHECK(evals.at(i - 1) >= evals.at(i));

    // A v_k = lambda_k v_k
    Tensor av = enkit::mat_mul(a, v);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        worst = std::max(worst,
                         std::abs(av.at(i, k) - evals.at(k) * v.at(i, k)));
    CAPTURE(seed);
    CAPTURE(n);
    CHECK(worst < 1e-8);

    // V' V = I
    Tensor vtv = enkit::mat_mul(enkit::mat_transpose(v), v);
    double ortho = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        ortho = std::max(ortho,
                         std::abs(vtv.at(i, j) - (i == j ? 1.0 : 0.0)));
    CHECK(ortho < 1e-8);

    // V Lambda V' reconstructs A
    Tensor lam = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) lam.set(i, i, evals.at(i));
    Tensor rec =
        enkit::mat_mul(enkit::mat_mul(v, lam), enkit::mat_transpose(v));
    CHECK(inf_norm(enkit::mat_sub(rec, a)) < 1e-8);
  }
}

TEST_CASE("jacobi rejects asymmetric input") {
  Tensor bad = Tensor::from_data({2, 2}, {1.0, 0.5, 0.2, 1.0});
  CHECK_THROWS_AS(enkit::sym_eig_jacobi(bad), NumericError);
}
