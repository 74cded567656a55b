// src/tensor.cc

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

#include "enkit/tensor.h"

#include <atomic>
#include <cmath>
#include <sstream>

namespace enkit {

namespace {
std::atomic<std::uint64_t> g_tensor_id{1};
}  // namespace

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape");
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::uint64_t Tensor::next_id() {
  return g_tensor_id.fetch_add(1, std::memory_order_relaxed);
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  if (shape.empty() || shape.size() > 2)
    throw DimensionError("tensor rank must be 1 or 2, got " +
                         shape_to_string(shape));
  auto impl = std::make_shared<Impl>();
  impl->data.assign(static_cast<std::size_t>(shape_numel(shape)), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  impl->id = next_id();
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape.empty() || shape.size() > 2)
    throw DimensionError("tensor rank must be 1 or 2, got " +
                         shape_to_string(shape));
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->id = next_id();
  Tensor t(std::move(impl));
  t.check_finite("from_data");
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::eye(int n) {
  Tensor t = zeros({n, n});
  for (int i = 0; i < n; ++i) t.set(i, i, 1.0);
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double range, Rng& rng,
                       bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.mutable_data()) v = rng.uniform(-range, range);
  return t;
}

const std::vector<int>& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

int Tensor::rows() const {
  const auto& s = shape();
  return s[0];
}

int Tensor::cols() const {
  const auto& s = shape();
  return s.size() == 2 ? s[1] : 1;
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(data().size());
}

bool Tensor::same_shape(const Tensor& other) const {
  return shape() == other.shape();
}

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item() on tensor of shape " + shape_str());
  return data()[0];
}

double Tensor::at(int i) const {
  return data()[static_cast<std::size_t>(i)];
}

double Tensor::at(int r, int c) const {
  return data()[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                static_cast<std::size_t>(c)];
}

void Tensor::set(int i, double v) {
  mutable_data()[static_cast<std::size_t>(i)] = v;
}

void Tensor::set(int r, int c, double v) {
  mutable_data()[static_cast<std::size_t>(r) *
                     static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(c)] = v;
}

bool Tensor::requires_grad() const {
  if (!impl_) return false;
  return impl_->requires_grad;
}

void Tensor::set_requires_grad(bool v) {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->requires_grad = v;
}

std::uint64_t Tensor::id() const {
  if (!impl_) return 0;
  return impl_->id;
}

Tensor Tensor::clone() const {
  return from_data(shape(), std::vector<double>(data().begin(), data().end()),
                   requires_grad());
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
  if (shape_numel(new_shape) != numel())
    throw DimensionError("reshape " + shape_str() + " -> " +
                         shape_to_string(new_shape) + " changes element count");
  return from_data(std::move(new_shape),
                   std::vector<double>(data().begin(), data().end()),
                   requires_grad());
}

void Tensor::check_finite(const std::string& context) const {
  for (double v : data())
    if (!std::isfinite(v))
      throw NumericError("non-finite value produced by " + context);
}

std::string Tensor::shape_str() const { return shape_to_string(shape()); }

}  // namespace enkit
