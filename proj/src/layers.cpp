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
#include "cdqag/layers.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "cdqag/error.hpp"
#include "cdqag/raster_io.hpp"

namespace cdqag {

Tensor Linear(const Tensor& x, const LinearParams& p) {
  if (p.weight.rank() != 2 || p.bias.size() != p.weight.dim(1)) {
    throw Error(ErrorCode::kShapeMismatch, "Linear: malformed parameters " +
                                               ShapeToString(p.weight.shape()));
  }
  const bool vector_in = x.rank() == 1;
  const Tensor rows = vector_in ? x.Reshape({1, x.size()}) : x;
  Tensor y = MatMul(rows, p.weight);
  for (std::size_t i = 0; i < y.dim(0); ++i) {
    for (std::size_t j = 0; j < y.dim(1); ++j) y.at(i, j) += p.bias[j];
  }
  CheckFinite(y, "Linear");
  return vector_in ? y.Reshape({y.dim(1)}) : y;
}

AttentionOutput MultiHeadAttention(const Tensor& query, const Tensor& key,
                                   const Tensor& value, const AttentionParams& p) {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "attention inputs must be [N x C]");
  }
  const std::size_t c = query.dim(1);
  if (key.dim(1) != c || value.dim(1) != c || key.dim(0) != value.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "attention: q " + ShapeToString(query.shape()) + ", k " +
                    ShapeToString(key.shape()) + ", v " + ShapeToString(value.shape()));
  }
  if (p.heads == 0 || c % p.heads != 0) {
    throw Error(ErrorCode::kHeadMismatch, std::to_string(c) + " channels not divisible by " +
                                              std::to_string(p.heads) + " heads");
  }
  const Tensor q = Linear(query, p.query);
  const Tensor k = Linear(key, p.key);
  const Tensor v = Linear(value, p.value);
  const std::size_t nq = q.dim(0), nk = k.dim(0), dh = c / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor logits({p.heads, nq, nk});
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t j = 0; j < nk; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) s += q.at(i, h * dh + d) * k.at(j, h * dh + d);
        logits.at(h, i, j) = s * scale;
      }
    }
  }
  AttentionWeights weights = Softmax(logits, 2);

  Tensor merged({nq, c});
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      for (std::size_t d = 0; d < dh; ++d) {
        double s = 0.0;
        for (std::size_t j = 0; j < nk; ++j) s += weights.at(h, i, j) * v.at(j, h * dh + d);
        merged.at(i, h * dh + d) = s;
      }
    }
  }
  return {Linear(merged, p.out), std::move(weights)};
}

Tensor FeedForward(const Tensor& x, const FfnParams& p) {
  return Linear(Relu(Linear(x, p.fc1)), p.fc2);
}

Tensor Conv(const Tensor& x, const ConvParams& p, std::size_t stride) {
  return Conv2d(x, p.weight, p.bias, stride, p.weight.dim(2) / 2);
}

Tensor Deconv(const Tensor& x, const DeconvParams& p) {
  return Deconv2d(x, p.weight, p.bias, 2);
}

Tensor ParamInitializer::Uniform(Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng_.Uniform(-bound, bound);
  return t;
}

LinearParams ParamInitializer::MakeLinear(std::size_t in, std::size_t out) {
  LinearParams p;
  p.weight = Uniform({in, out}, in);
  p.bias = Uniform({out}, in);
  return p;
}

ConvParams ParamInitializer::MakeConv(std::size_t cin, std::size_t cout, std::size_t kernel) {
  ConvParams p;
  const std::size_t fan_in = cin * kernel * kernel;
  p.weight = Uniform({cout, cin, kernel, kernel}, fan_in);
  p.bias = Uniform({cout}, fan_in);
  return p;
}

DeconvParams ParamInitializer::MakeDeconv(std::size_t cin, std::size_t cout) {
  DeconvParams p;
  // Each output pixel of a kernel==stride deconvolution sees cin inputs.
  p.weight = Uniform({cin, cout, 2, 2}, cin);
  p.bias = Uniform({cout}, cin);
  return p;
}

LayerNormParams ParamInitializer::MakeLayerNorm(std::size_t dim) {
  return {Tensor({dim}, 1.0), Tensor({dim}, 0.0)};
}

AttentionParams ParamInitializer::MakeAttention(std::size_t channels, std::size_t heads) {
  AttentionParams p;
  p.query = MakeLinear(channels, channels);
  p.key = MakeLinear(channels, channels);
  p.value = MakeLinear(channels, channels);
  p.out = MakeLinear(channels, channels);
  p.heads = heads;
  return p;
}

FfnParams ParamInitializer::MakeFfn(std::size_t channels) {
  return {MakeLinear(channels, 4 * channels), MakeLinear(4 * channels, channels)};
}

void AppendLinear(NamedTensors& out, const std::string& name, LinearParams& p) {
  out.emplace_back(name + ".weight", &p.weight);
  out.emplace_back(name + ".bias", &p.bias);
}

void AppendConv(NamedTensors& out, const std::string& name, ConvParams& p) {
  out.emplace_back(name + ".weight", &p.weight);
  out.emplace_back(name + ".bias", &p.bias);
}

void AppendDeconv(NamedTensors& out, const std::string& name, DeconvParams& p) {
  out.emplace_back(name + ".weight", &p.weight);
  out.emplace_back(name + ".bias", &p.bias);
}

void AppendLayerNorm(NamedTensors& out, const std::string& name, LayerNormParams& p) {
  out.emplace_back(name + ".gain", &p.gain);
  out.emplace_back(name + ".bias", &p.bias);
}

void AppendAttention(NamedTensors& out, const std::string& name, AttentionParams& p) {
  AppendLinear(out, name + ".query", p.query);
  AppendLinear(out, name + ".key", p.key);
  AppendLinear(out, name + ".value", p.value);
  AppendLinear(out, name + ".out", p.out);
}

void AppendFfn(NamedTensors& out, const std::string& name, FfnParams& p) {
  AppendLinear(out, name + ".fc1", p.fc1);
  AppendLinear(out, name + ".fc2", p.fc2);
}

void SaveTensors(const std::filesystem::path& prefix, const NamedTensors& tensors,
                 const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json manifest;
  manifest["extra"] = extra;
  manifest["tensors"] = nlohmann::ordered_json::array();
  std::string bytes;
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->size();
    for (double v : t->data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  std::ofstream js(prefix.string() + ".json");
  if (!js) throw Error(ErrorCode::kIo, "cannot write " + prefix.string() + ".json");
  js << manifest.dump(2) << "\n";
  std::ofstream bin(prefix.string() + ".bin", std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIo, "cannot write " + prefix.string() + ".bin");
  bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

nlohmann::json ReadManifest(const std::filesystem::path& prefix) {
  try {
    return nlohmann::json::parse(ReadFile(prefix.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, prefix.string() + ".json: " + e.what());
  }
}

nlohmann::json LoadTensors(const std::filesystem::path& prefix, const NamedTensors& tensors) {
  const nlohmann::json manifest = ReadManifest(prefix);
  const std::string bytes = ReadFile(prefix.string() + ".bin");
  const auto& entries = manifest.at("tensors");
  if (entries.size() != tensors.size()) {
    throw Error(ErrorCode::kMalformedFile, "checkpoint has " + std::to_string(entries.size()) +
                                               " tensors, model expects " +
                                               std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& e = entries[i];
    const auto& [name, t] = tensors[i];
    if (e.at("name").get<std::string>() != name ||
        e.at("shape").get<Shape>() != t->shape()) {
      throw Error(ErrorCode::kMalformedFile, "checkpoint entry " + std::to_string(i) +
                                                 " does not match " + name);
    }
    const auto offset = e.at("offset").get<std::size_t>();
    if ((offset + t->size()) * 8 > bytes.size()) {
      throw Error(ErrorCode::kMalformedFile, "checkpoint binary is truncated");
    }
    for (std::size_t k = 0; k < t->size(); ++k) {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) {
        bits = (bits << 8) |
               static_cast<unsigned char>(bytes[(offset + k) * 8 + static_cast<std::size_t>(b)]);
      }
      (*t)[k] = std::bit_cast<double>(bits);
    }
  }
  return manifest.value("extra", nlohmann::json::object());
}

}  // namespace cdqag
