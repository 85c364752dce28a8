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
#include "cdqag/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cdqag/error.hpp"

namespace cdqag {
namespace {

[[noreturn]] void ShapeError(const std::string& op, const std::string& detail) {
  throw Error(ErrorCode::kShapeMismatch, op + ": " + detail);
}

void RequireRank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    ShapeError(op, "expected rank " + std::to_string(rank) + ", got " +
                       ShapeToString(t.shape()));
  }
}

}  // namespace

std::string ShapeToString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) ShapeError("Tensor", "zero-sized dimension in " + ShapeToString(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != ShapeSize(shape_)) {
    ShapeError("Tensor", std::to_string(data_.size()) + " values for shape " +
                             ShapeToString(shape_));
  }
}

Tensor Tensor::FromRows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  for (const auto& r : rows) {
    if (r.size() != n) ShapeError("FromRows", "ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::Vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::Reshape(Shape shape) const {
  if (ShapeSize(shape) != data_.size()) {
    ShapeError("Reshape", ShapeToString(shape_) + " -> " + ShapeToString(shape));
  }
  return Tensor(std::move(shape), data_);
}

void CheckFinite(const Tensor& t, const char* where) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, where);
  }
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "MatMul");
  RequireRank(b, 2, "MatMul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    ShapeError("MatMul", ShapeToString(a.shape()) + " . " + ShapeToString(b.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
      out.at(i, j) = s;
    }
  }
  CheckFinite(out, "MatMul");
  return out;
}

Tensor Transpose(const Tensor& a) {
  RequireRank(a, 2, "Transpose");
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  RequireRank(x, 3, "Conv2d");
  RequireRank(weight, 4, "Conv2d");
  if (stride == 0) throw Error(ErrorCode::kBadStride, "Conv2d: stride must be >= 1");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != cin) {
    ShapeError("Conv2d", "input " + ShapeToString(x.shape()) + " vs weight " +
                             ShapeToString(weight.shape()));
  }
  if (bias.size() != 0 && (bias.rank() != 1 || bias.dim(0) != cout)) {
    ShapeError("Conv2d", "bias " + ShapeToString(bias.shape()));
  }
  if (h + 2 * pad < kh || w + 2 * pad < kw) ShapeError("Conv2d", "kernel larger than input");
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
  Tensor out({cout, oh, ow});
  const auto spad = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t o = 0; o < cout; ++o) {
    const double b = bias.size() ? bias[o] : 0.0;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t u = 0; u < kh; ++u) {
            const auto r = static_cast<std::ptrdiff_t>(i * stride + u) - spad;
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t v = 0; v < kw; ++v) {
              const auto q = static_cast<std::ptrdiff_t>(j * stride + v) - spad;
              if (q < 0 || q >= static_cast<std::ptrdiff_t>(w)) continue;
              s += weight[((o * cin + c) * kh + u) * kw + v] *
                   x.at(c, static_cast<std::size_t>(r), static_cast<std::size_t>(q));
            }
          }
        }
        out.at(o, i, j) = s + b;
      }
    }
  }
  CheckFinite(out, "Conv2d");
  return out;
}

Tensor Deconv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                std::size_t stride) {
  RequireRank(x, 3, "Deconv2d");
  RequireRank(weight, 4, "Deconv2d");
  if (stride == 0) throw Error(ErrorCode::kBadStride, "Deconv2d: stride must be >= 1");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(1);
  if (weight.dim(0) != cin || weight.dim(2) != stride || weight.dim(3) != stride) {
    ShapeError("Deconv2d", "input " + ShapeToString(x.shape()) + " vs weight " +
                               ShapeToString(weight.shape()));
  }
  if (bias.size() != 0 && (bias.rank() != 1 || bias.dim(0) != cout)) {
    ShapeError("Deconv2d", "bias " + ShapeToString(bias.shape()));
  }
  Tensor out({cout, h * stride, w * stride});
  for (std::size_t o = 0; o < cout; ++o) {
    const double b = bias.size() ? bias[o] : 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t u = 0; u < stride; ++u) {
          for (std::size_t v = 0; v < stride; ++v) {
            double s = 0.0;
            for (std::size_t c = 0; c < cin; ++c) {
              s += x.at(c, i, j) * weight[((c * cout + o) * stride + u) * stride + v];
            }
            out.at(o, i * stride + u, j * stride + v) = s + b;
          }
        }
      }
    }
  }
  CheckFinite(out, "Deconv2d");
  return out;
}

Tensor Softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) ShapeError("Softmax", "axis out of range");
  CheckFinite(x, "Softmax input");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t n = x.dim(axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = x[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[base + i * inner]);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(x[base + i * inner] - mx);
        out[base + i * inner] = e;
        sum += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= sum;
    }
  }
  return out;
}

Tensor Sigmoid(const Tensor& x) {
  CheckFinite(x, "Sigmoid input");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    // Branch keeps exp() from overflowing for large |v|.
    if (v >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor Relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() == 0) ShapeError("LayerNorm", "scalar input");
  const std::size_t n = x.dim(x.rank() - 1);
  if (gain.size() != n || bias.size() != n) {
    ShapeError("LayerNorm", "gain/bias do not match last dim of " + ShapeToString(x.shape()));
  }
  CheckFinite(x, "LayerNorm input");
  constexpr double kEps = 1e-5;
  Tensor out(x.shape());
  const std::size_t rows = x.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[r * n + i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[r * n + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::size_t i = 0; i < n; ++i) {
      out[r * n + i] = (x[r * n + i] - mean) * inv * gain[i] + bias[i];
    }
  }
  return out;
}

Tensor Add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    ShapeError("Add", ShapeToString(a.shape()) + " + " + ShapeToString(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  CheckFinite(out, "Add");
  return out;
}

Tensor Hadamard(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    ShapeError("Hadamard", ShapeToString(a.shape()) + " * " + ShapeToString(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  CheckFinite(out, "Hadamard");
  return out;
}

Tensor Scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  CheckFinite(out, "Scale");
  return out;
}

double Dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) ShapeError("Dot", "size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;  // weight of hi
};

// Source taps for one output coordinate, PyTorch align_corners=false rules.
Tap SourceTap(std::size_t out_index, std::size_t factor, std::size_t in_size) {
  double src = (static_cast<double>(out_index) + 0.5) / static_cast<double>(factor) - 0.5;
  if (src < 0.0) src = 0.0;
  auto lo = static_cast<std::size_t>(std::floor(src));
  if (lo > in_size - 1) lo = in_size - 1;
  const std::size_t hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}

void CheckUpsampleArgs(const Tensor& x, std::size_t factor, const char* op) {
  if (factor == 0) throw Error(ErrorCode::kBadFactor, std::string(op) + ": factor must be >= 1");
  RequireRank(x, 3, op);
}

}  // namespace

Tensor BilinearUpsample(const Tensor& x, std::size_t factor) {
  CheckUpsampleArgs(x, factor, "BilinearUpsample");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, h * factor, w * factor});
  for (std::size_t i = 0; i < h * factor; ++i) {
    const Tap ti = SourceTap(i, factor, h);
    for (std::size_t j = 0; j < w * factor; ++j) {
      const Tap tj = SourceTap(j, factor, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = x.at(ch, ti.lo, tj.lo) * (1.0 - tj.frac) +
                           x.at(ch, ti.lo, tj.hi) * tj.frac;
        const double bottom = x.at(ch, ti.hi, tj.lo) * (1.0 - tj.frac) +
                              x.at(ch, ti.hi, tj.hi) * tj.frac;
        out.at(ch, i, j) = top * (1.0 - ti.frac) + bottom * ti.frac;
      }
    }
  }
  CheckFinite(out, "BilinearUpsample");
  return out;
}

Tensor BilinearUpsampleAdjoint(const Tensor& grad, std::size_t factor) {
  CheckUpsampleArgs(grad, factor, "BilinearUpsampleAdjoint");
  const std::size_t c = grad.dim(0);
  if (grad.dim(1) % factor != 0 || grad.dim(2) % factor != 0) {
    ShapeError("BilinearUpsampleAdjoint", "size not divisible by factor");
  }
  const std::size_t h = grad.dim(1) / factor, w = grad.dim(2) / factor;
  Tensor out({c, h, w});
  for (std::size_t i = 0; i < h * factor; ++i) {
    const Tap ti = SourceTap(i, factor, h);
    for (std::size_t j = 0; j < w * factor; ++j) {
      const Tap tj = SourceTap(j, factor, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = grad.at(ch, i, j);
        out.at(ch, ti.lo, tj.lo) += g * (1.0 - ti.frac) * (1.0 - tj.frac);
        out.at(ch, ti.lo, tj.hi) += g * (1.0 - ti.frac) * tj.frac;
        out.at(ch, ti.hi, tj.lo) += g * ti.frac * (1.0 - tj.frac);
        out.at(ch, ti.hi, tj.hi) += g * ti.frac * tj.frac;
      }
    }
  }
  return out;
}

Tensor ToTokens(const Tensor& chw) {
  RequireRank(chw, 3, "ToTokens");
  const std::size_t c = chw.dim(0), n = chw.dim(1) * chw.dim(2);
  Tensor out({n, c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < n; ++p) out.at(p, ch) = chw[ch * n + p];
  }
  return out;
}

Tensor FromTokens(const Tensor& tokens, std::size_t height, std::size_t width) {
  RequireRank(tokens, 2, "FromTokens");
  const std::size_t n = tokens.dim(0), c = tokens.dim(1);
  if (n != height * width) {
    ShapeError("FromTokens", std::to_string(n) + " tokens for " + std::to_string(height) +
                                 "x" + std::to_string(width));
  }
  Tensor out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < n; ++p) out[ch * n + p] = tokens.at(p, ch);
  }
  return out;
}

Tensor ConcatChannels(std::initializer_list<const Tensor*> parts) {
  if (parts.size() == 0) ShapeError("ConcatChannels", "nothing to concatenate");
  const Tensor& first = **parts.begin();
  RequireRank(first, 3, "ConcatChannels");
  std::size_t channels = 0;
  for (const Tensor* t : parts) {
    RequireRank(*t, 3, "ConcatChannels");
    if (t->dim(1) != first.dim(1) || t->dim(2) != first.dim(2)) {
      ShapeError("ConcatChannels", "spatial size mismatch");
    }
    channels += t->dim(0);
  }
  std::vector<double> data;
  data.reserve(channels * first.dim(1) * first.dim(2));
  for (const Tensor* t : parts) data.insert(data.end(), t->data().begin(), t->data().end());
  return Tensor({channels, first.dim(1), first.dim(2)}, std::move(data));
}

Tensor MeanRows(const Tensor& x) {
  RequireRank(x, 2, "MeanRows");
  Tensor out({x.dim(1)});
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    for (std::size_t j = 0; j < x.dim(1); ++j) out[j] += x.at(i, j);
  }
  for (std::size_t j = 0; j < x.dim(1); ++j) out[j] /= static_cast<double>(x.dim(0));
  return out;
}

Tensor ScaleChannels(const Tensor& chw, const Tensor& gate) {
  RequireRank(chw, 3, "ScaleChannels");
  if (gate.size() != chw.dim(0)) ShapeError("ScaleChannels", "gate size != channels");
  Tensor out(chw.shape());
  const std::size_t n = chw.dim(1) * chw.dim(2);
  for (std::size_t c = 0; c < chw.dim(0); ++c) {
    for (std::size_t p = 0; p < n; ++p) out[c * n + p] = chw[c * n + p] * gate[c];
  }
  CheckFinite(out, "ScaleChannels");
  return out;
}

}  // namespace cdqag
