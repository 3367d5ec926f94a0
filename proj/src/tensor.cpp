// Copyright 2026 The icefuse Authors. All Rights Reserved.
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
#include "icefuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "icefuse/error.hpp"

namespace icefuse {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) require(extent > 0, ErrorKind::kDimension, "tensor extents must be positive");
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto extent : shape_) require(extent > 0, ErrorKind::kDimension, "tensor extents must be positive");
  require(data_.size() == shape_size(shape_), ErrorKind::kDimension,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
}

std::span<double> Tensor::plane(std::size_t c) {
  const std::size_t n = shape_[1] * shape_[2];
  return {data_.data() + c * n, n};
}

std::span<const double> Tensor::plane(std::size_t c) const {
  const std::size_t n = shape_[1] * shape_[2];
  return {data_.data() + c * n, n};
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::reshape(Shape shape) {
  require(shape_size(shape) == data_.size(), ErrorKind::kDimension,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  require(!parts.empty(), ErrorKind::kDimension, "concat of zero tensors");
  const std::size_t h = parts[0]->dim(1);
  const std::size_t w = parts[0]->dim(2);
  std::size_t channels = 0;
  for (const Tensor* p : parts) {
    require(p->rank() == 3 && p->dim(1) == h && p->dim(2) == w, ErrorKind::kDimension,
            "concat_channels: spatial extents differ");
    channels += p->dim(0);
  }
  Tensor out({channels, h, w});
  auto dst = out.values().begin();
  for (const Tensor* p : parts) dst = std::copy(p->values().begin(), p->values().end(), dst);
  return out;
}

Tensor slice_channels(const Tensor& input, std::size_t first, std::size_t count) {
  require(input.rank() == 3 && first + count <= input.dim(0) && count > 0, ErrorKind::kDimension,
          "slice_channels out of range");
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor out({count, input.dim(1), input.dim(2)});
  std::copy_n(input.data() + first * plane, count * plane, out.data());
  return out;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace icefuse
