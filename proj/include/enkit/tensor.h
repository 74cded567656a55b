// enkit/tensor.h

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

#ifndef ENKIT_TENSOR_H_
#define ENKIT_TENSOR_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "enkit/common.h"

namespace enkit {

// Dense row-major tensor of 64-bit floats, rank 1 or 2. A Tensor is a cheap
// handle onto shared storage: copies alias the same buffer, and the id
// identifies the storage on a Tape. Entries are required to stay finite;
// ops that would produce NaN/Inf throw NumericError instead.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Identity matrix, n x n.
  static Tensor eye(int n);
  // Entries i.i.d. uniform in [-range, range].
  static Tensor uniform(std::vector<int> shape, double range, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const std::vector<int>& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  // Matrix accessors; a rank-1 tensor behaves as a single column.
  int rows() const;
  int cols() const;
  std::int64_t numel() const;
  bool is_scalar() const { return numel() == 1; }
  bool same_shape(const Tensor& other) const;

  std::span<const double> data() const;
  std::span<double> mutable_data();

  double item() const;                       // value of a one-element tensor
  double at(int i) const;                    // rank-1 access
  double at(int r, int c) const;             // rank-2 access
  void set(int i, double v);
  void set(int r, int c, double v);

  bool requires_grad() const;
  void set_requires_grad(bool v);

  std::uint64_t id() const;

  // Deep copy with fresh id; inherits requires_grad unless overridden.
  Tensor clone() const;
  // Same data viewed under a new shape (copying; numel must match).
  Tensor reshaped(std::vector<int> new_shape) const;

  void check_finite(const std::string& context) const;

  std::string shape_str() const;

 private:
  struct Impl {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::uint64_t id = 0;
  };
  std::shared_ptr<Impl> impl_;

  static std::uint64_t next_id();
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace enkit

#endif  // ENKIT_TENSOR_H_
