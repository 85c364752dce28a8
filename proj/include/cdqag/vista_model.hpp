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
#ifndef CDQAG_VISTA_MODEL_HPP_
#define CDQAG_VISTA_MODEL_HPP_

// Desk-scale change question answering and grounding network. Small seeded
// encoders stand in for the pretrained text and image backbones; everything
// downstream of them (language-guided aggregation, the vision-language
// decoder, the Q&A selector, the coarse mask, the two-way mask decoder, the
// dynamic convolution head and the answer classifier) follows the full design.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdqag/layers.hpp"
#include "cdqag/raster_io.hpp"
#include "cdqag/tensor.hpp"
#include "cdqag/triplet_engine.hpp"

namespace cdqag {

struct ModelConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 32;
  std::size_t max_tokens = 15;  // including [SOS] and [EOC]
  std::size_t heads = 4;
  std::size_t vl_layers = 3;
  std::size_t text_vocab_size = 0;
  std::size_t answer_vocab_size = 0;
  std::size_t dyn_kernel = 1;
  std::uint64_t seed = 0;

  std::size_t mask_channels() const { return channels / 2; }
  // Throws ShapeMismatch / HeadMismatch on an inconsistent configuration.
  void Validate() const;
};

nlohmann::ordered_json ConfigToJson(const ModelConfig& config);
ModelConfig ConfigFromJson(const nlohmann::json& j);

// Word-level question vocabulary. Ids 0..2 are [SOS], [EOC], [UNK].
class TextVocabulary {
 public:
  static constexpr int kSos = 0;
  static constexpr int kEoc = 1;
  static constexpr int kUnk = 2;

  explicit TextVocabulary(std::vector<std::string> words);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Lower-cases, strips punctuation other than '-', maps unknown words to
  // [UNK] and keeps at most max_words tokens.
  std::vector<int> Tokenize(std::string_view question, std::size_t max_words) const;

 private:
  std::vector<std::string> tokens_;
};

// Every word of the template bank plus the class names.
TextVocabulary BuildTextVocabulary(const ClassTaxonomy& taxonomy, const TemplateBank& bank);

struct TextEncoderParams {
  Tensor embedding;   // [V x C]
  Tensor positional;  // [L_max x C]
  AttentionParams self_attn;
  LayerNormParams norm1;
  FfnParams ffn;
  LayerNormParams norm2;
};

struct ImageEncoderParams {
  ConvParams stem;    // stride 2
  ConvParams down;    // stride 4
  ConvParams stage3;  // stride 8
  ConvParams stage4;  // stride 16
  ConvParams stage5;  // stride 32
  ConvParams fuse3, fuse4, fuse5;  // 1x1, 2C -> C
};

struct AggregationParams {
  ConvParams visual5;       // 1x1 on F_c5
  LinearParams text_proj;   // sentence feature -> C
  ConvParams lateral4, lateral3;           // 1x1
  ConvParams smooth5, smooth4, smooth3;    // 3x3
  ConvParams reduce5;       // 1x1 before upsampling the stride-32 map
  DeconvParams up5;         // stride 32 -> 16
  ConvParams down3;         // 3x3 stride 2: stride 8 -> 16
  ConvParams merge;         // 1x1, 3C -> C
};

struct VlLayerParams {
  AttentionParams self_attn;
  AttentionParams cross_attn;
  FfnParams ffn;
};

struct PixelDecoderParams {
  ConvParams conv1, conv2;  // 3x3 + rectifier
  ConvParams project;       // 1x1, C -> 1
};

struct TwoWayBlockParams {
  AttentionParams prompt_to_image;
  LayerNormParams norm1;
  FfnParams ffn;
  LayerNormParams norm2;
  AttentionParams image_to_prompt;
  LayerNormParams norm3;
};

struct MaskDecoderParams {
  ConvParams prompt_embed;  // 1x1, 1 -> C
  TwoWayBlockParams blocks[2];
  DeconvParams up1;  // C -> C, stride 16 -> 8
  DeconvParams up2;  // C -> C/2, stride 8 -> 4
};

struct ClassifierParams {
  LinearParams fc1;  // C -> C
  LinearParams fc2;  // C -> |V|
};

struct VistaParams {
  TextEncoderParams text;
  ImageEncoderParams image;
  AggregationParams aggregation;
  std::vector<VlLayerParams> vl_layers;
  PixelDecoderParams pixel_decoder;
  MaskDecoderParams mask_decoder;
  LinearParams dynamic_head;  // C -> C_m * K * K + 1
  ClassifierParams classifier;
};

VistaParams InitParams(const ModelConfig& config);
NamedTensors ListParams(VistaParams& params);
void SaveCheckpoint(const std::filesystem::path& prefix, const ModelConfig& config,
                    const TextVocabulary& text_vocab, VistaParams& params);
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> text_vocab;
  VistaParams params;
};
Checkpoint LoadCheckpoint(const std::filesystem::path& prefix);

// --- components -----------------------------------------------------------

struct TextFeatures {
  Tensor words;     // F_w: [(len + 2) x C]
  Tensor sentence;  // F_s: [C], the [EOC] row
  AttentionWeights attention;
};

// `tokens` excludes [SOS]/[EOC]; 1 <= len <= max_tokens - 2.
TextFeatures EncodeText(std::span<const int> tokens, const TextEncoderParams& params,
                        const ModelConfig& config);

struct ChangeFeatures {
  Tensor c3, c4, c5;  // [C x H/2^i x W/2^i]
};

struct BackboneFeatures {
  Tensor s3, s4, s5;
};

BackboneFeatures RunBackbone(const Tensor& image, const ImageEncoderParams& params);
// Shared-weight backbone on both images, then a 1x1 conv over [t1, t2].
ChangeFeatures EncodeImages(const Tensor& image_t1, const Tensor& image_t2,
                            const ImageEncoderParams& params);

struct AggregationOutput {
  Tensor gated5;         // Conv(F_c5) gated by Linear(F_s), [C x H/32 x W/32]
  Tensor m5, m4, m3;     // pyramid outputs
  Tensor merged;         // F_m, [C x H/16 x W/16]
  Tensor visual_tokens;  // F_v, [N x C]
};

Tensor LanguageGate(const Tensor& c5, const Tensor& sentence, const AggregationParams& p);
AggregationOutput AggregateFeatures(const ChangeFeatures& feats, const Tensor& sentence,
                                    const AggregationParams& params);

struct VlDecodeOutput {
  Tensor fused;  // F_vl: [N x C]
  std::vector<AttentionWeights> self_weights;
  std::vector<AttentionWeights> cross_weights;
};

// Per layer: v' = v + SA(v); f' = CA(v', w) * v'; f = FFN(f' * v') + f'.
VlDecodeOutput DecodeVisionLanguage(const Tensor& visual, const Tensor& words,
                                    std::span<const VlLayerParams> layers);

struct SelectorOutput {
  Tensor alpha;      // [C]
  Tensor beta;       // [C], exactly 1 - alpha
  Tensor selection;  // F_sel: [C]
  Tensor pooled_visual;
  Tensor pooled_text;
};

inline constexpr double kSelectorClamp = 30.0;

// Mean-pools F_vl and F_w to C-vectors and blends them with a softmax gate.
SelectorOutput SelectQuestionAnswer(const Tensor& fused, const Tensor& words);

// sigma(F_sel) gates the pixel decoder channels; 1x1 projection to one map.
struct CoarseMaskOutput {
  Tensor decoded;  // F_PD(F_vl): [C x h x w]
  Tensor gated;
  Tensor mask;     // M_c: [1 x h x w]
};
CoarseMaskOutput CoarseMask(const Tensor& selection, const Tensor& fused, std::size_t h16,
                            std::size_t w16, const PixelDecoderParams& params);

struct MaskDecodeOutput {
  Tensor features;  // F~_M: [C/2 x H/4 x W/4]
  Tensor prompt_tokens, image_tokens;  // stream states after the last block
  std::vector<AttentionWeights> weights;
};

MaskDecodeOutput DecodeMask(const Tensor& coarse, const Tensor& visual, std::size_t h16,
                            std::size_t w16, const MaskDecoderParams& params);

struct DynamicHeadOutput {
  Tensor kernel;      // [1 x C_m x K x K]
  double bias = 0.0;
  Tensor low_res;     // [1 x H/4 x W/4]
  Tensor logits;      // M: [1 x H x W]
};

DynamicHeadOutput DynamicHead(const Tensor& selection, const Tensor& mask_features,
                              const LinearParams& head, std::size_t kernel_size);

Tensor ClassifierLogits(const Tensor& selection, const ClassifierParams& params);
Tensor Classify(const Tensor& selection, const ClassifierParams& params);

// --- end to end -----------------------------------------------------------

struct ForwardDiagnostics {
  std::vector<std::pair<std::string, Shape>> shapes;
  // Every attention map produced (text SA, VL SA/CA, two-way blocks).
  std::vector<std::pair<std::string, AttentionWeights>> attention;

  // max over all rows of |sum - 1| and the smallest weight seen.
  double MaxRowSumError() const;
  double MinWeight() const;
};

struct ForwardOutput {
  TextFeatures text;
  ChangeFeatures change;
  AggregationOutput aggregation;
  VlDecodeOutput vl;
  SelectorOutput selector;
  CoarseMaskOutput coarse;
  MaskDecodeOutput mask_decoder;
  DynamicHeadOutput head;
  Tensor answer_probs;
  ForwardDiagnostics diagnostics;
};

ForwardOutput Forward(const Tensor& image_t1, const Tensor& image_t2,
                      std::span<const int> tokens, const VistaParams& params,
                      const ModelConfig& config);

// Class ids normalized to [0, 1] and replicated over three channels.
Tensor MaskToImage(const SemanticMask& mask, std::size_t num_classes);

}  // namespace cdqag

#endif  // CDQAG_VISTA_MODEL_HPP_
