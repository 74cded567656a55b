// src/tape.cc

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

#include "enkit/tape.h"

#include <algorithm>
#include <cmath>

namespace enkit {

namespace {

constexpr double kVarianceClamp = 1e-8;

// Broadcast classes for binary elementwise ops.
enum class Bcast { kSame, kLeftScalar, kRightScalar };

Bcast classify(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (a.is_scalar()) return Bcast::kLeftScalar;
  if (b.is_scalar()) return Bcast::kRightScalar;
  throw DimensionError("elementwise op on incompatible shapes " +
                       a.shape_str() + " and " + b.shape_str());
}

std::vector<int> out_shape(const Tensor& a, const Tensor& b, Bcast bc) {
  return bc == Bcast::kLeftScalar ? b.shape() : a.shape();
}

}  // namespace

void Tape::record(const Tensor& out, BackwardFn fn) {
  (void)out;
  nodes_.push_back(std::move(fn));
}

void Tape::accum(const Tensor& t, const std::vector<double>& g) {
  auto& slot = grads_[t.id()];
  if (slot.empty()) slot.assign(static_cast<std::size_t>(t.numel()), 0.0);
  ENKIT_CHECK(slot.size() == g.size(), DimensionError,
              "gradient shape mismatch during accumulation");
  for (std::size_t i = 0; i < g.size(); ++i) {
    slot[i] += g[i];
    if (!std::isfinite(slot[i]))
      throw NumericError("non-finite gradient during backward");
  }
}

const std::vector<double>* Tape::grad_vec(const Tensor& t) const {
  auto it = grads_.find(t.id());
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor Tape::grad(const Tensor& t) const {
  const auto* g = grad_vec(t);
  if (!g) return Tensor::zeros(t.shape());
  return Tensor::from_data(t.shape(), *g);
}

bool Tape::has_grad(const Tensor& t) const { return grad_vec(t) != nullptr; }

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

void Tape::backward(const Tensor& loss) {
  ENKIT_CHECK(loss.defined() && loss.numel() == 1, ContractError,
              "backward requires a scalar loss");
  grads_.clear();
  grads_[loss.id()] = {1.0};
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  nodes_.clear();
}

// ---------------------------------------------------------------------------
// binary elementwise

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  Bcast bc = classify(a, b);
  Tensor out = Tensor::zeros(out_shape(a, b, bc));
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    double av = bc == Bcast::kLeftScalar ? ad[0] : ad[i];
    double bv = bc == Bcast::kRightScalar ? bd[0] : bd[i];
    od[i] = av + bv;
  }
  out.check_finite("add");
  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [a, b, out, bc](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      if (a.requires_grad()) {
        if (bc == Bcast::kLeftScalar) {
          double s = 0.0;
          for (double v : *g) s += v;
          t.accum(a, {s});
        } else {
          t.accum(a, *g);
        }
      }
      if (b.requires_grad()) {
        if (bc == Bcast::kRightScalar) {
          double s = 0.0;
          for (double v : *g) s += v;
          t.accum(b, {s});
        } else {
          t.accum(b, *g);
        }
      }
    });
  }
  return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  Bcast bc = classify(a, b);
  Tensor out = Tensor::zeros(out_shape(a, b, bc));
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    double av = bc == Bcast::kLeftScalar ? ad[0] : ad[i];
    double bv = bc == Bcast::kRightScalar ? bd[0] : bd[i];
    od[i] = av - bv;
  }
  out.check_finite("sub");
  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [a, b, out, bc](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      if (a.requires_grad()) {
        if (bc == Bcast::kLeftScalar) {
          double s = 0.0;
          for (double v : *g) s += v;
          t.accum(a, {s});
        } else {
          t.accum(a, *g);
        }
      }
      if (b.requires_grad()) {
        std::vector<double> gb;
        if (bc == Bcast::kRightScalar) {
          double s = 0.0;
          for (double v : *g) s += v;
          gb = {-s};
        } else {
          gb.resize(g->size());
          for (std::size_t i = 0; i < g->size(); ++i) gb[i] = -(*g)[i];
        }
        t.accum(b, gb);
      }
    });
  }
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  Bcast bc = classify(a, b);
  Tensor out = Tensor::zeros(out_shape(a, b, bc));
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    double av = bc == Bcast::kLeftScalar ? ad[0] : ad[i];
    double bv = bc == Bcast::kRightScalar ? bd[0] : bd[i];
    od[i] = av * bv;
  }
  out.check_finite("mul");
  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [a, b, out, bc](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      auto ad = a.data(), bd = b.data();
      if (a.requires_grad()) {
        if (bc == Bcast::kLeftScalar) {
          double s = 0.0;
          for (std::size_t i = 0; i < g->size(); ++i) s += (*g)[i] * bd[i];
          t.accum(a, {s});
        } else {
          std::vector<double> ga(g->size());
          for (std::size_t i = 0; i < g->size(); ++i) {
            double bv = bc == Bcast::kRightScalar ? bd[0] : bd[i];
            ga[i] = (*g)[i] * bv;
          }
          t.accum(a, ga);
        }
      }
      if (b.requires_grad()) {
        if (bc == Bcast::kRightScalar) {
          double s = 0.0;
          for (std::size_t i = 0; i < g->size(); ++i) s += (*g)[i] * ad[i];
          t.accum(b, {s});
        } else {
          std::vector<double> gb(g->size());
          for (std::size_t i = 0; i < g->size(); ++i) {
            double av = bc == Bcast::kLeftScalar ? ad[0] : ad[i];
            gb[i] = (*g)[i] * av;
          }
          t.accum(b, gb);
        }
      }
    });
  }
  return out;
}

Tensor Tape::div(const Tensor& a, const Tensor& b) {
  Bcast bc = classify(a, b);
  for (double v : b.data())
    if (v == 0.0) throw NumericError("division by zero");
  Tensor out = Tensor::zeros(out_shape(a, b, bc));
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    double av = bc == Bcast::kLeftScalar ? ad[0] : ad[i];
    double bv = bc == Bcast::kRightScalar ? bd[0] : bd[i];
    od[i] = av / bv;
  }
  out.check_finite("div");
  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [a, b, out, bc](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      auto ad = a.data(), bd = b.data();
      if (a.requires_grad()) {
        if (bc == Bcast::kLeftScalar) {
          double s = 0.0;
          for (std::size_t i = 0; i < g->size(); ++i) s += (*g)[i] / bd[i];
          t.accum(a, {s});
        } else {
          std::vector<double> ga(g->size());
          for (std::size_t i = 0; i < g->size(); ++i) {
            double bv = bc == Bcast::kRightScalar ? bd[0] : bd[i];
            ga[i] = (*g)[i] / bv;
          }
          t.accum(a, ga);
        }
      }
      if (b.requires_grad()) {
        if (bc == Bcast::kRightScalar) {
          double s = 0.0;
          for (std::size_t i = 0; i < g->size(); ++i) {
            double av = a.data()[i];
            s += -(*g)[i] * av / (bd[0] * bd[0]);
          }
          t.accum(b, {s});
        } else {
          std::vector<double> gb(g->size());
          for (std::size_t i = 0; i < g->size(); ++i) {
            double av = bc == Bcast::kLeftScalar ? ad[0] : ad[i];
            gb[i] = -(*g)[i] * av / (bd[i] * bd[i]);
          }
          t.accum(b, gb);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// unary elementwise
//
// Shared implementation for the simple unary ops. The backward closure gets
// (x_value, y_value, upstream) per element.
#define ENKIT_UNARY_OP(NAME, FWD_EXPR, BWD_EXPR, DOMAIN_CHECK)               \
  Tensor Tape::NAME(const Tensor& x) {                                      \
    Tensor out = Tensor::zeros(x.shape());                                  \
    auto xd = x.data();                                                     \
    auto od = out.mutable_data();                                           \
    for (std::size_t i = 0; i < od.size(); ++i) {                           \
      double xv = xd[i];                                                    \
      DOMAIN_CHECK;                                                         \
      od[i] = (FWD_EXPR);                                                   \
    }                                                                       \
    out.check_finite(#NAME);                                                \
    if (x.requires_grad()) {                                                \
      out.set_requires_grad(true);                                          \
      record(out, [x, out](Tape& t) {                                       \
        const auto* g = t.grad_vec(out);                                    \
        if (!g) return;                                                     \
        auto xd = x.data();                                                 \
        auto yd = out.data();                                               \
        (void)xd;                                                           \
        (void)yd;                                                           \
        std::vector<double> gx(g->size());                                  \
        for (std::size_t i = 0; i < g->size(); ++i) {                       \
          double xv = xd[i];                                                \
          double yv = yd[i];                                                \
          (void)xv;                                                         \
          (void)yv;                                                         \
          gx[i] = (*g)[i] * (BWD_EXPR);                                     \
        }                                                                   \
        t.accum(x, gx);                                                     \
      });                                                                   \
    }                                                                       \
    return out;                                                             \
  }

ENKIT_UNARY_OP(relu, xv > 0.0 ? xv : 0.0, xv > 0.0 ? 1.0 : 0.0, )
ENKIT_UNARY_OP(tanh, std::tanh(xv), 1.0 - yv * yv, )
ENKIT_UNARY_OP(sigmoid, 1.0 / (1.0 + std::exp(-xv)), yv * (1.0 - yv), )
ENKIT_UNARY_OP(exp, std::exp(xv), yv, )
ENKIT_UNARY_OP(
    log, std::log(xv), 1.0 / xv,
    if (xv <= 0.0) throw NumericError("log of nonpositive value"))
ENKIT_UNARY_OP(
    sqrt, std::sqrt(xv), 0.5 / yv,
    if (xv < 0.0) throw NumericError("sqrt of negative value"))

#undef ENKIT_UNARY_OP

Tensor Tape::scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = c * xd[i];
  out.check_finite("scale");
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, c](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(g->size());
      for (std::size_t i = 0; i < g->size(); ++i) gx[i] = c * (*g)[i];
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::offset(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto od = out.mutable_data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] + c;
  out.check_finite("offset");
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (g) t.accum(x, *g);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear algebra and shape

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  ENKIT_CHECK(a.rank() == 2 && b.rank() == 2, DimensionError,
              "matmul requires rank-2 operands");
  int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2)
    throw DimensionError("matmul inner dims disagree: " + a.shape_str() +
                         " * " + b.shape_str());
  Tensor out = Tensor::zeros({m, n});
  auto ad = a.data(), bd = b.data();
  auto od = out.mutable_data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = ad[static_cast<std::size_t>(i * k + p)];
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j)
        od[static_cast<std::size_t>(i * n + j)] +=
            av * bd[static_cast<std::size_t>(p * n + j)];
    }
  out.check_finite("matmul");
  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [a, b, out, m, k, n](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      auto ad = a.data(), bd = b.data();
      if (a.requires_grad()) {
        // dA = G * B^T
        std::vector<double> ga(static_cast<std::size_t>(m) *
                                   static_cast<std::size_t>(k),
                               0.0);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            double gv = (*g)[static_cast<std::size_t>(i * n + j)];
            if (gv == 0.0) continue;
            for (int p = 0; p < k; ++p)
              ga[static_cast<std::size_t>(i * k + p)] +=
                  gv * bd[static_cast<std::size_t>(p * n + j)];
          }
        t.accum(a, ga);
      }
      if (b.requires_grad()) {
        // dB = A^T * G
        std::vector<double> gb(static_cast<std::size_t>(k) *
                                   static_cast<std::size_t>(n),
                               0.0);
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            double av = ad[static_cast<std::size_t>(i * k + p)];
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j)
              gb[static_cast<std::size_t>(p * n + j)] +=
                  av * (*g)[static_cast<std::size_t>(i * n + j)];
          }
        t.accum(b, gb);
      }
    });
  }
  return out;
}

Tensor Tape::transpose(const Tensor& x) {
  ENKIT_CHECK(x.rank() == 2, DimensionError, "transpose requires rank 2");
  int m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.set(j, i, x.at(i, j));
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, m, n](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(m) *
                             static_cast<std::size_t>(n));
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          gx[static_cast<std::size_t>(i * n + j)] =
              (*g)[static_cast<std::size_t>(j * m + i)];
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
  ENKIT_CHECK(shape_numel(shape) == x.numel(), DimensionError,
              "reshape changes element count");
  Tensor out = Tensor::from_data(
      shape, std::vector<double>(x.data().begin(), x.data().end()));
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (g) t.accum(x, *g);
    });
  }
  return out;
}

Tensor Tape::col(const Tensor& v) {
  ENKIT_CHECK(v.rank() == 1, DimensionError, "col expects a rank-1 tensor");
  return reshape(v, {static_cast<int>(v.numel()), 1});
}

Tensor Tape::rowvec(const Tensor& v) {
  ENKIT_CHECK(v.rank() == 1, DimensionError, "rowvec expects a rank-1 tensor");
  return reshape(v, {1, static_cast<int>(v.numel())});
}

// ---------------------------------------------------------------------------
// reductions

Tensor Tape::softmax_rows(const Tensor& x) {
  ENKIT_CHECK(x.rank() == 2, DimensionError, "softmax_rows requires rank 2");
  int m = x.rows(), n = x.cols();
  ENKIT_CHECK(n >= 1, DimensionError, "softmax_rows on empty rows");
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = x.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(x.at(i, j) - mx);
      out.set(i, j, e);
      z += e;
    }
    for (int j = 0; j < n; ++j) out.set(i, j, out.at(i, j) / z);
  }
  out.check_finite("softmax_rows");
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, m, n](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(m) *
                             static_cast<std::size_t>(n));
      for (int i = 0; i < m; ++i) {
        double dotv = 0.0;
        for (int j = 0; j < n; ++j)
          dotv += (*g)[static_cast<std::size_t>(i * n + j)] * out.at(i, j);
        for (int j = 0; j < n; ++j)
          gx[static_cast<std::size_t>(i * n + j)] =
              out.at(i, j) *
              ((*g)[static_cast<std::size_t>(i * n + j)] - dotv);
      }
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::row_sum(const Tensor& x) {
  ENKIT_CHECK(x.rank() == 2, DimensionError, "row_sum requires rank 2");
  int m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += x.at(i, j);
    out.set(i, s);
  }
  out.check_finite("row_sum");
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, m, n](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(m) *
                             static_cast<std::size_t>(n));
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          gx[static_cast<std::size_t>(i * n + j)] =
              (*g)[static_cast<std::size_t>(i)];
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  out.check_finite("sum");
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(x.numel()), (*g)[0]);
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::sum_list(const std::vector<Tensor>& terms) {
  ENKIT_CHECK(!terms.empty(), ContractError, "sum_list of no terms");
  for (const auto& t : terms)
    ENKIT_CHECK(t.same_shape(terms[0]), DimensionError,
                "sum_list shape mismatch");
  Tensor out = Tensor::zeros(terms[0].shape());
  auto od = out.mutable_data();
  bool needs_grad = false;
  for (const auto& term : terms) {
    auto td = term.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += td[i];
    needs_grad = needs_grad || term.requires_grad();
  }
  out.check_finite("sum_list");
  if (needs_grad) {
    out.set_requires_grad(true);
    record(out, [terms, out](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      for (const auto& term : terms)
        if (term.requires_grad()) t.accum(term, *g);
    });
  }
  return out;
}

Tensor Tape::pick(const Tensor& x, int flat_index) {
  ENKIT_CHECK(flat_index >= 0 && flat_index < x.numel(), ContractError,
              "pick index out of range");
  Tensor out = Tensor::scalar(x.data()[static_cast<std::size_t>(flat_index)]);
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, flat_index](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(x.numel()), 0.0);
      gx[static_cast<std::size_t>(flat_index)] = (*g)[0];
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::dot(const Tensor& a, const Tensor& b) {
  ENKIT_CHECK(a.same_shape(b), DimensionError, "dot requires equal shapes");
  return sum(mul(a, b));
}

// ---------------------------------------------------------------------------
// assembly

Tensor Tape::stack_rows(const std::vector<Tensor>& rows) {
  ENKIT_CHECK(!rows.empty(), ContractError, "stack_rows of no rows");
  int n = static_cast<int>(rows[0].numel());
  for (const auto& r : rows)
    ENKIT_CHECK(r.rank() == 1 && r.numel() == n, DimensionError,
                "stack_rows expects equal-length rank-1 rows");
  int k = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({k, n});
  bool needs_grad = false;
  for (int i = 0; i < k; ++i) {
    auto rd = rows[static_cast<std::size_t>(i)].data();
    for (int j = 0; j < n; ++j) out.set(i, j, rd[static_cast<std::size_t>(j)]);
    needs_grad = needs_grad || rows[static_cast<std::size_t>(i)].requires_grad();
  }
  if (needs_grad) {
    out.set_requires_grad(true);
    record(out, [rows, out, k, n](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      for (int i = 0; i < k; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (!r.requires_grad()) continue;
        std::vector<double> gr(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
          gr[static_cast<std::size_t>(j)] =
              (*g)[static_cast<std::size_t>(i * n + j)];
        t.accum(r, gr);
      }
    });
  }
  return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  ENKIT_CHECK(!parts.empty(), ContractError, "concat_cols of no parts");
  int m = parts[0].rows();
  int total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    ENKIT_CHECK(p.rank() == 2 && p.rows() == m, DimensionError,
                "concat_cols row count mismatch");
    total += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out = Tensor::zeros({m, total});
  int base = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p.cols(); ++j) out.set(i, base + j, p.at(i, j));
    base += p.cols();
  }
  if (needs_grad) {
    out.set_requires_grad(true);
    record(out, [parts, out, m, total](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      int base = 0;
      for (const auto& p : parts) {
        int pc = p.cols();
        if (p.requires_grad()) {
          std::vector<double> gp(static_cast<std::size_t>(m) *
                                 static_cast<std::size_t>(pc));
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < pc; ++j)
              gp[static_cast<std::size_t>(i * pc + j)] =
                  (*g)[static_cast<std::size_t>(i * total + base + j)];
          t.accum(p, gp);
        }
        base += pc;
      }
    });
  }
  return out;
}

Tensor Tape::concat_vec(const std::vector<Tensor>& parts) {
  ENKIT_CHECK(!parts.empty(), ContractError, "concat_vec of no parts");
  int total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    ENKIT_CHECK(p.rank() == 1, DimensionError, "concat_vec expects rank 1");
    total += static_cast<int>(p.numel());
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out = Tensor::zeros({total});
  int base = 0;
  for (const auto& p : parts) {
    auto pd = p.data();
    for (std::size_t j = 0; j < pd.size(); ++j)
      out.set(base + static_cast<int>(j), pd[j]);
    base += static_cast<int>(pd.size());
  }
  if (needs_grad) {
    out.set_requires_grad(true);
    record(out, [parts, out](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::size_t base = 0;
      for (const auto& p : parts) {
        std::size_t pn = static_cast<std::size_t>(p.numel());
        if (p.requires_grad()) {
          std::vector<double> gp(g->begin() + static_cast<std::ptrdiff_t>(base),
                                 g->begin() +
                                     static_cast<std::ptrdiff_t>(base + pn));
          t.accum(p, gp);
        }
        base += pn;
      }
    });
  }
  return out;
}

Tensor Tape::slice_cols(const Tensor& x, int c0, int c1) {
  ENKIT_CHECK(x.rank() == 2, DimensionError, "slice_cols requires rank 2");
  ENKIT_CHECK(0 <= c0 && c0 < c1 && c1 <= x.cols(), ContractError,
              "slice_cols range out of bounds");
  int m = x.rows(), w = c1 - c0, n = x.cols();
  Tensor out = Tensor::zeros({m, w});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) out.set(i, j, x.at(i, c0 + j));
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, m, w, n, c0](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(m) *
                                 static_cast<std::size_t>(n),
                             0.0);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
          gx[static_cast<std::size_t>(i * n + c0 + j)] =
              (*g)[static_cast<std::size_t>(i * w + j)];
      t.accum(x, gx);
    });
  }
  return out;
}

Tensor Tape::row(const Tensor& x, int r) {
  ENKIT_CHECK(x.rank() == 2, DimensionError, "row requires rank 2");
  ENKIT_CHECK(0 <= r && r < x.rows(), ContractError, "row index out of range");
  int n = x.cols();
  Tensor out = Tensor::zeros({n});
  for (int j = 0; j < n; ++j) out.set(j, x.at(r, j));
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, r, n](Tape& t) {
      const auto* g = t.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(x.numel()), 0.0);
      for (int j = 0; j < n; ++j)
        gx[static_cast<std::size_t>(r * n + j)] =
            (*g)[static_cast<std::size_t>(j)];
      t.accum(x, gx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// fused sequence ops

std::pair<Tensor, Tensor> Tape::mean_std_over_time(
    const Tensor& m, const std::optional<Tensor>& weights) {
  ENKIT_CHECK(m.rank() == 2, DimensionError,
              "mean_std_over_time requires rank 2");
  int c = m.rows(), t_len = m.cols();
  ENKIT_CHECK(t_len >= 1, ContractError, "mean_std_over_time on empty input");
  std::vector<double> alpha(static_cast<std::size_t>(t_len),
                            1.0 / static_cast<double>(t_len));
  if (weights) {
    ENKIT_CHECK(weights->rank() == 1 && weights->numel() == t_len,
                DimensionError, "weights must be rank-1 of length T");
    double s = 0.0;
    for (int t = 0; t < t_len; ++t) {
      double w = weights->at(t);
      ENKIT_CHECK(w >= 0.0, ContractError, "negative pooling weight");
      alpha[static_cast<std::size_t>(t)] = w;
      s += w;
    }
    ENKIT_CHECK(std::abs(s - 1.0) < 1e-9, ContractError,
                "pooling weights must sum to 1");
  }

  Tensor mean = Tensor::zeros({c});
  Tensor stdev = Tensor::zeros({c});
  std::vector<bool> clamped(static_cast<std::size_t>(c), false);
  for (int i = 0; i < c; ++i) {
    double mu = 0.0, ex2 = 0.0;
    for (int t = 0; t < t_len; ++t) {
      double v = m.at(i, t);
      mu += alpha[static_cast<std::size_t>(t)] * v;
      ex2 += alpha[static_cast<std::size_t>(t)] * v * v;
    }
    double var = ex2 - mu * mu;
    mean.set(i, mu);
    if (var < kVarianceClamp) {
      stdev.set(i, 0.0);
      clamped[static_cast<std::size_t>(i)] = true;
    } else {
      stdev.set(i, std::sqrt(var));
    }
  }
  mean.check_finite("mean_std_over_time");
  stdev.check_finite("mean_std_over_time");

  bool wants_grad =
      m.requires_grad() || (weights && weights->requires_grad());
  if (wants_grad) {
    mean.set_requires_grad(true);
    stdev.set_requires_grad(true);
    Tensor w_tensor = weights ? *weights : Tensor();
    record(mean, [m, w_tensor, mean, stdev, alpha, clamped, c,
                  t_len](Tape& tp) {
      const auto* gm = tp.grad_vec(mean);
      const auto* gs = tp.grad_vec(stdev);
      if (!gm && !gs) return;
      bool m_grad = m.requires_grad();
      bool w_grad = w_tensor.defined() && w_tensor.requires_grad();
      std::vector<double> gmat;
      if (m_grad)
        gmat.assign(static_cast<std::size_t>(m.numel()), 0.0);
      std::vector<double> gw;
      if (w_grad) gw.assign(static_cast<std::size_t>(t_len), 0.0);
      for (int i = 0; i < c; ++i) {
        double gmu = gm ? (*gm)[static_cast<std::size_t>(i)] : 0.0;
        double gsd = gs ? (*gs)[static_cast<std::size_t>(i)] : 0.0;
        double mu = mean.at(i);
        double sd = stdev.at(i);
        bool cl = clamped[static_cast<std::size_t>(i)];
        for (int t = 0; t < t_len; ++t) {
          double a = alpha[static_cast<std::size_t>(t)];
          double v = m.at(i, t);
          if (m_grad) {
            double g = gmu * a;
            if (!cl && gsd != 0.0) g += gsd * a * (v - mu) / sd;
            gmat[static_cast<std::size_t>(i * t_len + t)] += g;
          }
          if (w_grad) {
            double g = gmu * v;
            if (!cl && gsd != 0.0) g += gsd * (v * v - 2.0 * mu * v) / (2.0 * sd);
            gw[static_cast<std::size_t>(t)] += g;
          }
        }
      }
      if (m_grad) tp.accum(m, gmat);
      if (w_grad) tp.accum(w_tensor, gw);
    });
  }
  return {mean, stdev};
}

Tensor Tape::scale_rows(const Tensor& m, const Tensor& s) {
  ENKIT_CHECK(m.rank() == 2 && s.rank() == 1 && s.numel() == m.rows(),
              DimensionError, "scale_rows expects [CxT] and [C]");
  int c = m.rows(), t_len = m.cols();
  Tensor out = Tensor::zeros({c, t_len});
  for (int i = 0; i < c; ++i)
    for (int t = 0; t < t_len; ++t) out.set(i, t, s.at(i) * m.at(i, t));
  out.check_finite("scale_rows");
  if (m.requires_grad() || s.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [m, s, out, c, t_len](Tape& tp) {
      const auto* g = tp.grad_vec(out);
      if (!g) return;
      if (m.requires_grad()) {
        std::vector<double> gm(static_cast<std::size_t>(m.numel()));
        for (int i = 0; i < c; ++i)
          for (int t = 0; t < t_len; ++t)
            gm[static_cast<std::size_t>(i * t_len + t)] =
                (*g)[static_cast<std::size_t>(i * t_len + t)] * s.at(i);
        tp.accum(m, gm);
      }
      if (s.requires_grad()) {
        std::vector<double> gs(static_cast<std::size_t>(c), 0.0);
        for (int i = 0; i < c; ++i)
          for (int t = 0; t < t_len; ++t)
            gs[static_cast<std::size_t>(i)] +=
                (*g)[static_cast<std::size_t>(i * t_len + t)] * m.at(i, t);
        tp.accum(s, gs);
      }
    });
  }
  return out;
}

Tensor Tape::broadcast_cols(const Tensor& v, int t) {
  ENKIT_CHECK(v.rank() == 1, DimensionError, "broadcast_cols expects rank 1");
  ENKIT_CHECK(t >= 1, ContractError, "broadcast_cols needs t >= 1");
  int c = static_cast<int>(v.numel());
  Tensor out = Tensor::zeros({c, t});
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < t; ++j) out.set(i, j, v.at(i));
  if (v.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [v, out, c, t](Tape& tp) {
      const auto* g = tp.grad_vec(out);
      if (!g) return;
      std::vector<double> gv(static_cast<std::size_t>(c), 0.0);
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < t; ++j)
          gv[static_cast<std::size_t>(i)] +=
              (*g)[static_cast<std::size_t>(i * t + j)];
      tp.accum(v, gv);
    });
  }
  return out;
}

Tensor Tape::splice(const Tensor& x, const std::vector<int>& offsets) {
  ENKIT_CHECK(x.rank() == 2, DimensionError, "splice requires rank 2");
  ENKIT_CHECK(!offsets.empty(), ContractError, "splice with no offsets");
  for (std::size_t i = 1; i < offsets.size(); ++i)
    ENKIT_CHECK(offsets[i] > offsets[i - 1], ContractError,
                "splice offsets must be strictly increasing");
  int c = x.rows(), t_in = x.cols();
  int lo = offsets.front(), hi = offsets.back();
  int span = hi - lo;
  int t_out = t_in - span;
  if (t_out < 1)
    throw ContractError("sequence of length " + std::to_string(t_in) +
                        " shorter than context span " + std::to_string(span + 1));
  int k = static_cast<int>(offsets.size());
  Tensor out = Tensor::zeros({c * k, t_out});
  for (int t = 0; t < t_out; ++t)
    for (int o = 0; o < k; ++o) {
      int src = t - lo + offsets[static_cast<std::size_t>(o)];
      for (int i = 0; i < c; ++i) out.set(o * c + i, t, x.at(i, src));
    }
  if (x.requires_grad()) {
    out.set_requires_grad(true);
    record(out, [x, out, offsets, c, t_in, t_out, lo, k](Tape& tp) {
      const auto* g = tp.grad_vec(out);
      if (!g) return;
      std::vector<double> gx(static_cast<std::size_t>(x.numel()), 0.0);
      int w = t_out;
      for (int t = 0; t < t_out; ++t)
        for (int o = 0; o < k; ++o) {
          int src = t - lo + offsets[static_cast<std::size_t>(o)];
          for (int i = 0; i < c; ++i)
            gx[static_cast<std::size_t>(i * t_in + src)] +=
                (*g)[static_cast<std::size_t>((o * c + i) * w + t)];
        }
      tp.accum(x, gx);
    });
  }
  return out;
}

}  // namespace enkit
