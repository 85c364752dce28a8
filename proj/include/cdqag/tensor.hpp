/* Copyright 2026 The cdqag-forge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CDQAG_TENSOR_HPP_
#define CDQAG_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cdqag {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

// Dense row-major tensor of doubles. A value type: copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor FromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  // Same data, new shape of equal size.
  Tensor Reshape(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws NonFinite if any entry is NaN or infinite.
void CheckFinite(const Tensor& t, const char* where);

// ---------------------------------------------------------------------------
// Primitives. All throw ShapeMismatch on incompatible shapes and NonFinite if
// a result is not finite. Reductions run in a fixed sequential order.

Tensor MatMul(const Tensor& a, const Tensor& b);  // [m x k] . [k x n]
Tensor Transpose(const Tensor& a);                // [m x n] -> [n x m]

// x: [Cin x H x W], weight: [Cout x Cin x K x K], bias: [Cout] (or empty).
// Cross-correlation; output spatial size (H + 2 pad - K) / stride + 1.
Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad);
// Transposed convolution with kernel == stride and no padding: x [Cin x H x W],
// weight [Cin x Cout x s x s] -> [Cout x sH x sW]. Adjoint of Conv2d with the
// same weight read as [Cout_conv=Cin x Cin_conv=Cout x s x s].
Tensor Deconv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                std::size_t stride = 2);

Tensor Softmax(const Tensor& x, std::size_t axis);
Tensor Sigmoid(const Tensor& x);
Tensor Relu(const Tensor& x);
// Normalizes over the last axis (eps 1e-5), then applies gain and bias.
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Hadamard(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double s);
double Dot(const Tensor& a, const Tensor& b);

// Bilinear interpolation with half-pixel centres (align_corners = false).
Tensor BilinearUpsample(const Tensor& x, std::size_t factor);
// Transpose of BilinearUpsample as a linear map.
Tensor BilinearUpsampleAdjoint(const Tensor& grad, std::size_t factor);

// [C x H x W] <-> [N x C] with N = H * W in row-major pixel order.
Tensor ToTokens(const Tensor& chw);
Tensor FromTokens(const Tensor& tokens, std::size_t height, std::size_t width);
// Concatenate [Ci x H x W] tensors along the channel axis.
Tensor ConcatChannels(std::initializer_list<const Tensor*> parts);
// Mean over axis 0 of a [N x C] tensor -> [C].
Tensor MeanRows(const Tensor& x);
// Multiply channel c of [C x H x W] by gate[c].
Tensor ScaleChannels(const Tensor& chw, const Tensor& gate);

}  // namespace cdqag

#endif  // CDQAG_TENSOR_HPP_
