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
#ifndef CDQAG_LAYERS_HPP_
#define CDQAG_LAYERS_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cdqag/rng.hpp"
#include "cdqag/tensor.hpp"
#include "json.hpp"

namespace cdqag {

// y = x W + b with W: [in x out], b: [out].
struct LinearParams {
  Tensor weight;
  Tensor bias;
};

struct ConvParams {
  Tensor weight;  // [Cout x Cin x K x K]
  Tensor bias;    // [Cout]
};

// Transposed conv, kernel == stride == 2.
struct DeconvParams {
  Tensor weight;  // [Cin x Cout x 2 x 2]
  Tensor bias;    // [Cout]
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

struct AttentionParams {
  LinearParams query, key, value, out;
  std::size_t heads = 1;
};

struct FfnParams {
  LinearParams fc1;  // C -> 4C
  LinearParams fc2;  // 4C -> C
};

// Row-normalized attention probabilities, [heads x queries x keys].
using AttentionWeights = Tensor;

struct AttentionOutput {
  Tensor output;  // [Nq x C]
  AttentionWeights weights;
};

// x: [N x in] or [in] (treated as one row; the result is then [out]).
Tensor Linear(const Tensor& x, const LinearParams& p);

// Scaled dot-product multi-head attention with input and output projections.
AttentionOutput MultiHeadAttention(const Tensor& query, const Tensor& key,
                                   const Tensor& value, const AttentionParams& p);

// Linear -> max(0, .) -> Linear.
Tensor FeedForward(const Tensor& x, const FfnParams& p);

Tensor Conv(const Tensor& x, const ConvParams& p, std::size_t stride = 1);
Tensor Deconv(const Tensor& x, const DeconvParams& p);

// Seeded initialization: weights and biases uniform in +-1/sqrt(fan_in).
class ParamInitializer {
 public:
  explicit ParamInitializer(std::uint64_t seed) : rng_(seed) {}

  Tensor Uniform(Shape shape, std::size_t fan_in);
  LinearParams MakeLinear(std::size_t in, std::size_t out);
  ConvParams MakeConv(std::size_t cin, std::size_t cout, std::size_t kernel);
  DeconvParams MakeDeconv(std::size_t cin, std::size_t cout);
  LayerNormParams MakeLayerNorm(std::size_t dim);
  AttentionParams MakeAttention(std::size_t channels, std::size_t heads);
  FfnParams MakeFfn(std::size_t channels);

 private:
  SplitMix64 rng_;
};

// Flat parameter list used for checkpoints: every tensor in a fixed order.
using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;

void AppendLinear(NamedTensors& out, const std::string& name, LinearParams& p);
void AppendConv(NamedTensors& out, const std::string& name, ConvParams& p);
void AppendDeconv(NamedTensors& out, const std::string& name, DeconvParams& p);
void AppendLayerNorm(NamedTensors& out, const std::string& name, LayerNormParams& p);
void AppendAttention(NamedTensors& out, const std::string& name, AttentionParams& p);
void AppendFfn(NamedTensors& out, const std::string& name, FfnParams& p);

// Checkpoint format: <prefix>.json holds {"extra": ..., "tensors": [{"name",
// "shape", "offset"}]} and <prefix>.bin holds the values as little-endian f64
// in manifest order. `offset` counts values, not bytes.
void SaveTensors(const std::filesystem::path& prefix, const NamedTensors& tensors,
                 const nlohmann::ordered_json& extra);
// Fills the given tensors in place; names and shapes must match the manifest.
nlohmann::json LoadTensors(const std::filesystem::path& prefix, const NamedTensors& tensors);
nlohmann::json ReadManifest(const std::filesystem::path& prefix);

}  // namespace cdqag

#endif  // CDQAG_LAYERS_HPP_
