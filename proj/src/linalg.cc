// src/linalg.cc

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

#include "enkit/linalg.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace enkit {

namespace {

void check_square(const Tensor& a, const char* who) {
  ENKIT_CHECK(a.rank() == 2 && a.rows() == a.cols(), DimensionError,
              std::string(who) + " requires a square matrix, got " +
                  a.shape_str());
}

}  // namespace

Tensor cholesky_factor(const Tensor& a) {
  check_square(a, "cholesky_factor");
  int n = a.rows();
  Tensor l = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (s <= 0.0)
          throw NumericError("cholesky: nonpositive pivot at index " +
                             std::to_string(i) + " (matrix not SPD)");
        l.set(i, j, std::sqrt(s));
      } else {
        l.set(i, j, s / l.at(j, j));
      }
    }
  }
  return l;
}

Tensor cholesky_solve_factored(const Tensor& l, const Tensor& b) {
  int n = l.rows();
  ENKIT_CHECK(b.rank() == 2 && b.rows() == n, DimensionError,
              "cholesky_solve: rhs rows must match matrix dim");
  int k = b.cols();
  // forward: L y = b
  Tensor y = Tensor::zeros({n, k});
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < n; ++i) {
      double s = b.at(i, c);
      for (int j = 0; j < i; ++j) s -= l.at(i, j) * y.at(j, c);
      y.set(i, c, s / l.at(i, i));
    }
  // backward: L^T x = y
  Tensor x = Tensor::zeros({n, k});
  for (int c = 0; c < k; ++c)
    for (int i = n - 1; i >= 0; --i) {
      double s = y.at(i, c);
      for (int j = i + 1; j < n; ++j) s -= l.at(j, i) * x.at(j, c);
      x.set(i, c, s / l.at(i, i));
    }
  x.check_finite("cholesky_solve");
  return x;
}

Tensor cholesky_solve(const Tensor& a, const Tensor& b) {
  return cholesky_solve_factored(cholesky_factor(a), b);
}

double cholesky_logdet(const Tensor& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows(); ++i) s += std::log(l.at(i, i));
  return 2.0 * s;
}

std::pair<Tensor, Tensor> sym_eig_jacobi(const Tensor& a) {
  check_square(a, "sym_eig_jacobi");
  int n = a.rows();
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(a.at(i, j) - a.at(j, i)) > 1e-10 * std::max(1.0, scale))
        throw NumericError("sym_eig_jacobi: input not symmetric at (" +
                           std::to_string(i) + "," + std::to_string(j) + ")");

  Tensor m = a.clone();
  Tensor v = Tensor::eye(n);
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (off <= 1e-30 * std::max(1.0, scale * scale)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = m.at(p, q);
        if (apq == 0.0) continue;
        double app = m.at(p, p), aqq = m.at(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // Apply the rotation on rows/cols p and q of m, and on v.
        for (int i = 0; i < n; ++i) {
          double mip = m.at(i, p), miq = m.at(i, q);
          m.set(i, p, c * mip - s * miq);
          m.set(i, q, s * mip + c * miq);
        }
        for (int i = 0; i < n; ++i) {
          double mpi = m.at(p, i), mqi = m.at(q, i);
          m.set(p, i, c * mpi - s * mqi);
          m.set(q, i, s * mpi + c * mqi);
        }
        for (int i = 0; i < n; ++i) {
          double vip = v.at(i, p), viq = v.at(i, q);
          v.set(i, p, c * vip - s * viq);
          v.set(i, q, s * vip + c * viq);
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&m](int x, int y) { return m.at(x, x) > m.at(y, y); });
  Tensor evals = Tensor::zeros({n});
  Tensor evecs = Tensor::zeros({n, n});
  for (int k = 0; k < n; ++k) {
    int src = order[static_cast<std::size_t>(k)];
    evals.set(k, m.at(src, src));
    for (int i = 0; i < n; ++i) evecs.set(i, k, v.at(i, src));
  }
  evals.check_finite("sym_eig_jacobi");
  return {evals, evecs};
}

Tensor mat_add(const Tensor& a, const Tensor& b) {
  ENKIT_CHECK(a.same_shape(b), DimensionError, "mat_add shape mismatch");
  Tensor out = a.clone();
  auto od = out.mutable_data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return out;
}

Tensor mat_sub(const Tensor& a, const Tensor& b) {
  ENKIT_CHECK(a.same_shape(b), DimensionError, "mat_sub shape mismatch");
  Tensor out = a.clone();
  auto od = out.mutable_data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return out;
}

Tensor mat_mul(const Tensor& a, const Tensor& b) {
  ENKIT_CHECK(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
              DimensionError,
              "mat_mul dims disagree: " + a.shape_str() + " * " +
                  b.shape_str());
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  auto od = out.mutable_data();
  auto ad = a.data(), bd = b.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = ad[static_cast<std::size_t>(i * k + p)];
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j)
        od[static_cast<std::size_t>(i * n + j)] +=
            av * bd[static_cast<std::size_t>(p * n + j)];
    }
  return out;
}

Tensor mat_transpose(const Tensor& a) {
  ENKIT_CHECK(a.rank() == 2, DimensionError, "mat_transpose requires rank 2");
  Tensor out = Tensor::zeros({a.cols(), a.rows()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.set(j, i, a.at(i, j));
  return out;
}

Tensor mat_scale(const Tensor& a, double c) {
  Tensor out = a.clone();
  for (double& v : out.mutable_data()) v *= c;
  return out;
}

Tensor symmetrize(const Tensor& a) {
  check_square(a, "symmetrize");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.set(i, j, 0.5 * (a.at(i, j) + a.at(j, i)));
  return out;
}

double quad_form(const Tensor& q, const Tensor& x, const Tensor& y) {
  check_square(q, "quad_form");
  int n = q.rows();
  ENKIT_CHECK(x.numel() == n && y.numel() == n, DimensionError,
              "quad_form vector length mismatch");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += q.at(i, j) * y.data()[static_cast<std::size_t>(j)];
    acc += x.data()[static_cast<std::size_t>(i)] * row;
  }
  return acc;
}

}  // namespace enkit
