// enkit/tape.h

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

#ifndef ENKIT_TAPE_H_
#define ENKIT_TAPE_H_

#include <functional>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "enkit/tensor.h"

namespace enkit {

// Reverse-mode autodiff over a fixed op set. Ops are recorded in call order;
// backward() walks the records in exact reverse order and accumulates each
// tensor's gradient as the sum over all ops that consumed it (define-by-run,
// one tape per forward pass). A Tape and the tensors on it are confined to a
// single thread; run independent tapes for parallel work.
//
// Recording happens only when some input requires a gradient, so purely
// numeric code can run through a Tape at no cost.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- elementwise; binary ops accept equal shapes or a one-element
  // --- tensor broadcast against the other operand.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);
  Tensor relu(const Tensor& x);
  Tensor tanh(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor exp(const Tensor& x);
  Tensor log(const Tensor& x);  // x > 0 elementwise or NumericError
  Tensor sqrt(const Tensor& x);
  Tensor scale(const Tensor& x, double c);   // c * x
  Tensor offset(const Tensor& x, double c);  // x + c

  // --- shape and linear algebra
  Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] * [k x n]
  Tensor transpose(const Tensor& x);
  Tensor reshape(const Tensor& x, std::vector<int> shape);
  Tensor col(const Tensor& v);     // [n] -> [n x 1]
  Tensor rowvec(const Tensor& v);  // [n] -> [1 x n]

  // --- reductions and selection
  Tensor softmax_rows(const Tensor& x);  // stable; each row sums to 1
  Tensor row_sum(const Tensor& x);       // [m x n] -> [m]
  Tensor sum(const Tensor& x);           // all elements -> scalar
  Tensor sum_list(const std::vector<Tensor>& terms);
  Tensor pick(const Tensor& x, int flat_index);  // -> scalar
  Tensor dot(const Tensor& a, const Tensor& b);  // sum(a*b), same shape

  // --- assembly
  Tensor stack_rows(const std::vector<Tensor>& rows);    // k x [n] -> [k x n]
  Tensor concat_cols(const std::vector<Tensor>& parts);  // same row count
  Tensor concat_vec(const std::vector<Tensor>& parts);   // rank-1 concat
  Tensor slice_cols(const Tensor& x, int c0, int c1);    // columns [c0, c1)
  Tensor row(const Tensor& x, int r);                    // -> rank-1 [n]

  // --- fused sequence ops
  // Weighted mean and standard deviation over the time axis of a [C x T]
  // map. Weights (if given) are length T, nonnegative, summing to 1 within
  // 1e-9; omitted weights mean uniform 1/T. Variances below 1e-8 are
  // clamped to zero before the square root (gradient zero there).
  std::pair<Tensor, Tensor> mean_std_over_time(
      const Tensor& m, const std::optional<Tensor>& weights = std::nullopt);
  Tensor scale_rows(const Tensor& m, const Tensor& s);  // row c scaled by s_c
  Tensor broadcast_cols(const Tensor& v, int t);        // [C] -> [C x T]
  // Valid-mode context splice: column t' of the output stacks the input
  // frames at t' - min(offsets) + each offset; T' = T - (max - min).
  Tensor splice(const Tensor& x, const std::vector<int>& offsets);

  // Seeds d(loss)/d(loss) = 1, walks the records in reverse accumulating
  // every tensor's total gradient, then resets the op list. Gradients stay
  // readable until the next backward(). Loss must be a one-element tensor.
  void backward(const Tensor& loss);

  // Gradient accumulated for t by the last backward(); zeros if none.
  Tensor grad(const Tensor& t) const;
  bool has_grad(const Tensor& t) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  void clear();  // drop records and gradients

 private:
  using BackwardFn = std::function<void(Tape&)>;
  std::vector<BackwardFn> nodes_;
  std::unordered_map<std::uint64_t, std::vector<double>> grads_;

  void record(const Tensor& out, BackwardFn fn);
  // Accumulate g into the gradient slot of t (scaled view of same length).
  void accum(const Tensor& t, const std::vector<double>& g);
  const std::vector<double>* grad_vec(const Tensor& t) const;

  friend struct TapeAccess;
};

}  // namespace enkit

#endif  // ENKIT_TAPE_H_
