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
#include "cdqag/vista_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "cdqag/error.hpp"

namespace cdqag {
namespace {

void RequireShape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": expected " +
                                               ShapeToString(expected) + ", got " +
                                               ShapeToString(t.shape()));
  }
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || raw == '-') {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) || raw == '_') {
      flush();
    }
  }
  flush();
  return words;
}

}  // namespace

void ModelConfig::Validate() const {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw Error(ErrorCode::kShapeMismatch, "input size must be a positive multiple of 32");
  }
  if (channels < 2 || channels % 2 != 0) {
    throw Error(ErrorCode::kShapeMismatch, "channel width must be even");
  }
  if (heads == 0 || channels % heads != 0) {
    throw Error(ErrorCode::kHeadMismatch, "channels must be divisible by heads");
  }
  if (max_tokens < 3) throw Error(ErrorCode::kTooLong, "max_tokens must be >= 3");
  if (vl_layers == 0) throw Error(ErrorCode::kShapeMismatch, "need at least one VL layer");
  if (text_vocab_size < 4 || answer_vocab_size < 2) {
    throw Error(ErrorCode::kShapeMismatch, "vocabularies are too small");
  }
  if (dyn_kernel == 0 || dyn_kernel % 2 == 0) {
    throw Error(ErrorCode::kShapeMismatch, "dynamic kernel size must be odd");
  }
}

nlohmann::ordered_json ConfigToJson(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["channels"] = c.channels;
  j["max_tokens"] = c.max_tokens;
  j["heads"] = c.heads;
  j["vl_layers"] = c.vl_layers;
  j["text_vocab_size"] = c.text_vocab_size;
  j["answer_vocab_size"] = c.answer_vocab_size;
  j["dyn_kernel"] = c.dyn_kernel;
  j["seed"] = c.seed;
  return j;
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.max_tokens = j.at("max_tokens").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.vl_layers = j.at("vl_layers").get<std::size_t>();
    c.text_vocab_size = j.at("text_vocab_size").get<std::size_t>();
    c.answer_vocab_size = j.at("answer_vocab_size").get<std::size_t>();
    c.dyn_kernel = j.at("dyn_kernel").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("model config: ") + e.what());
  }
  c.Validate();
  return c;
}

TextVocabulary::TextVocabulary(std::vector<std::string> words) {
  tokens_ = {"[SOS]", "[EOC]", "[UNK]"};
  std::set<std::string> seen(tokens_.begin(), tokens_.end());
  for (auto& w : words) {
    if (seen.insert(w).second) tokens_.push_back(std::move(w));
  }
}

std::vector<int> TextVocabulary::Tokenize(std::string_view question,
                                          std::size_t max_words) const {
  std::vector<int> ids;
  for (const auto& w : SplitWords(question)) {
    if (ids.size() == max_words) break;
    auto it = std::find(tokens_.begin(), tokens_.end(), w);
    ids.push_back(it == tokens_.end() ? kUnk : static_cast<int>(it - tokens_.begin()));
  }
  return ids;
}

TextVocabulary BuildTextVocabulary(const ClassTaxonomy& taxonomy, const TemplateBank& bank) {
  std::set<std::string> words;
  for (auto t : kAllQuestionTypes) {
    for (int id = 0; id < kTemplatesPerType; ++id) {
      for (int time : {1, 2}) {
        QuestionSpec spec{t, time, std::nullopt, id};
        if (!IsSceneLevel(t)) spec.subject = 0;
        for (auto& w : SplitWords(RenderQuestion(spec, taxonomy, bank))) words.insert(w);
      }
    }
  }
  for (const auto& name : taxonomy.names()) {
    for (auto& w : SplitWords(name)) words.insert(w);
  }
  return TextVocabulary(std::vector<std::string>(words.begin(), words.end()));
}

VistaParams InitParams(const ModelConfig& config) {
  config.Validate();
  const std::size_t c = config.channels, cm = config.mask_channels();
  ParamInitializer init(config.seed);
  VistaParams p;

  p.text.embedding = init.Uniform({config.text_vocab_size, c}, 1);
  p.text.positional = init.Uniform({config.max_tokens, c}, c);
  p.text.self_attn = init.MakeAttention(c, config.heads);
  p.text.norm1 = init.MakeLayerNorm(c);
  p.text.ffn = init.MakeFfn(c);
  p.text.norm2 = init.MakeLayerNorm(c);

  p.image.stem = init.MakeConv(3, c, 3);
  p.image.down = init.MakeConv(c, c, 3);
  p.image.stage3 = init.MakeConv(c, c, 3);
  p.image.stage4 = init.MakeConv(c, c, 3);
  p.image.stage5 = init.MakeConv(c, c, 3);
  p.image.fuse3 = init.MakeConv(2 * c, c, 1);
  p.image.fuse4 = init.MakeConv(2 * c, c, 1);
  p.image.fuse5 = init.MakeConv(2 * c, c, 1);

  auto& a = p.aggregation;
  a.visual5 = init.MakeConv(c, c, 1);
  a.text_proj = init.MakeLinear(c, c);
  a.lateral4 = init.MakeConv(c, c, 1);
  a.lateral3 = init.MakeConv(c, c, 1);
  a.smooth5 = init.MakeConv(c, c, 3);
  a.smooth4 = init.MakeConv(c, c, 3);
  a.smooth3 = init.MakeConv(c, c, 3);
  a.reduce5 = init.MakeConv(c, c, 1);
  a.up5 = init.MakeDeconv(c, c);
  a.down3 = init.MakeConv(c, c, 3);
  a.merge = init.MakeConv(3 * c, c, 1);

  for (std::size_t i = 0; i < config.vl_layers; ++i) {
    VlLayerParams layer;
    layer.self_attn = init.MakeAttention(c, config.heads);
    layer.cross_attn = init.MakeAttention(c, config.heads);
    layer.ffn = init.MakeFfn(c);
    p.vl_layers.push_back(std::move(layer));
  }

  p.pixel_decoder.conv1 = init.MakeConv(c, c, 3);
  p.pixel_decoder.conv2 = init.MakeConv(c, c, 3);
  p.pixel_decoder.project = init.MakeConv(c, 1, 1);

  auto& md = p.mask_decoder;
  md.prompt_embed = init.MakeConv(1, c, 1);
  for (auto& block : md.blocks) {
    block.prompt_to_image = init.MakeAttention(c, config.heads);
    block.norm1 = init.MakeLayerNorm(c);
    block.ffn = init.MakeFfn(c);
    block.norm2 = init.MakeLayerNorm(c);
    block.image_to_prompt = init.MakeAttention(c, config.heads);
    block.norm3 = init.MakeLayerNorm(c);
  }
  md.up1 = init.MakeDeconv(c, c);
  md.up2 = init.MakeDeconv(c, cm);

  p.dynamic_head = init.MakeLinear(c, cm * config.dyn_kernel * config.dyn_kernel + 1);
  p.classifier.fc1 = init.MakeLinear(c, c);
  p.classifier.fc2 = init.MakeLinear(c, config.answer_vocab_size);
  return p;
}

NamedTensors ListParams(VistaParams& p) {
  NamedTensors out;
  out.emplace_back("text.embedding", &p.text.embedding);
  out.emplace_back("text.positional", &p.text.positional);
  AppendAttention(out, "text.self_attn", p.text.self_attn);
  AppendLayerNorm(out, "text.norm1", p.text.norm1);
  AppendFfn(out, "text.ffn", p.text.ffn);
  AppendLayerNorm(out, "text.norm2", p.text.norm2);

  AppendConv(out, "image.stem", p.image.stem);
  AppendConv(out, "image.down", p.image.down);
  AppendConv(out, "image.stage3", p.image.stage3);
  AppendConv(out, "image.stage4", p.image.stage4);
  AppendConv(out, "image.stage5", p.image.stage5);
  AppendConv(out, "image.fuse3", p.image.fuse3);
  AppendConv(out, "image.fuse4", p.image.fuse4);
  AppendConv(out, "image.fuse5", p.image.fuse5);

  auto& a = p.aggregation;
  AppendConv(out, "agg.visual5", a.visual5);
  AppendLinear(out, "agg.text_proj", a.text_proj);
  AppendConv(out, "agg.lateral4", a.lateral4);
  AppendConv(out, "agg.lateral3", a.lateral3);
  AppendConv(out, "agg.smooth5", a.smooth5);
  AppendConv(out, "agg.smooth4", a.smooth4);
  AppendConv(out, "agg.smooth3", a.smooth3);
  AppendConv(out, "agg.reduce5", a.reduce5);
  AppendDeconv(out, "agg.up5", a.up5);
  AppendConv(out, "agg.down3", a.down3);
  AppendConv(out, "agg.merge", a.merge);

  for (std::size_t i = 0; i < p.vl_layers.size(); ++i) {
    const std::string base = "vl." + std::to_string(i);
    AppendAttention(out, base + ".self_attn", p.vl_layers[i].self_attn);
    AppendAttention(out, base + ".cross_attn", p.vl_layers[i].cross_attn);
    AppendFfn(out, base + ".ffn", p.vl_layers[i].ffn);
  }

  AppendConv(out, "pixel.conv1", p.pixel_decoder.conv1);
  AppendConv(out, "pixel.conv2", p.pixel_decoder.conv2);
  AppendConv(out, "pixel.project", p.pixel_decoder.project);

  auto& md = p.mask_decoder;
  AppendConv(out, "mask.prompt_embed", md.prompt_embed);
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string base = "mask.block" + std::to_string(i);
    auto& b = md.blocks[i];
    AppendAttention(out, base + ".prompt_to_image", b.prompt_to_image);
    AppendLayerNorm(out, base + ".norm1", b.norm1);
    AppendFfn(out, base + ".ffn", b.ffn);
    AppendLayerNorm(out, base + ".norm2", b.norm2);
    AppendAttention(out, base + ".image_to_prompt", b.image_to_prompt);
    AppendLayerNorm(out, base + ".norm3", b.norm3);
  }
  AppendDeconv(out, "mask.up1", md.up1);
  AppendDeconv(out, "mask.up2", md.up2);

  AppendLinear(out, "head.dynamic", p.dynamic_head);
  AppendLinear(out, "head.classifier.fc1", p.classifier.fc1);
  AppendLinear(out, "head.classifier.fc2", p.classifier.fc2);
  return out;
}

void SaveCheckpoint(const std::filesystem::path& prefix, const ModelConfig& config,
                    const TextVocabulary& text_vocab, VistaParams& params) {
  nlohmann::ordered_json extra;
  extra["config"] = ConfigToJson(config);
  extra["text_vocab"] = text_vocab.tokens();
  SaveTensors(prefix, ListParams(params), extra);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& prefix) {
  const nlohmann::json manifest = ReadManifest(prefix);
  Checkpoint ck;
  try {
    ck.config = ConfigFromJson(manifest.at("extra").at("config"));
    ck.text_vocab = manifest.at("extra").at("text_vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("checkpoint: ") + e.what());
  }
  ck.params = InitParams(ck.config);
  LoadTensors(prefix, ListParams(ck.params));
  // Attention head counts are structural, not stored as tensors.
  return ck;
}

TextFeatures EncodeText(std::span<const int> tokens, const TextEncoderParams& params,
                        const ModelConfig& config) {
  if (tokens.empty()) throw Error(ErrorCode::kTooLong, "question has no tokens");
  if (tokens.size() + 2 > config.max_tokens) {
    throw Error(ErrorCode::kTooLong, std::to_string(tokens.size()) + " tokens exceed " +
                                         std::to_string(config.max_tokens - 2));
  }
  const std::size_t c = params.embedding.dim(1);
  const std::size_t vocab = params.embedding.dim(0);
  std::vector<int> ids;
  ids.push_back(TextVocabulary::kSos);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  ids.push_back(TextVocabulary::kEoc);

  Tensor x({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw Error(ErrorCode::kTokenOutOfVocab, "token id " + std::to_string(ids[i]));
    }
    for (std::size_t j = 0; j < c; ++j) {
      x.at(i, j) = params.embedding.at(static_cast<std::size_t>(ids[i]), j) +
                   params.positional.at(i, j);
    }
  }
  auto attn = MultiHeadAttention(x, x, x, params.self_attn);
  Tensor h = LayerNorm(Add(x, attn.output), params.norm1.gain, params.norm1.bias);
  Tensor out = LayerNorm(Add(h, FeedForward(h, params.ffn)), params.norm2.gain,
                         params.norm2.bias);
  Tensor sentence({c});
  for (std::size_t j = 0; j < c; ++j) sentence[j] = out.at(ids.size() - 1, j);
  return {std::move(out), std::move(sentence), std::move(attn.weights)};
}

BackboneFeatures RunBackbone(const Tensor& image, const ImageEncoderParams& p) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw Error(ErrorCode::kShapeMismatch, "image must be [3 x H x W], got " +
                                               ShapeToString(image.shape()));
  }
  Tensor x = Relu(Conv(image, p.stem, 2));
  x = Relu(Conv(x, p.down, 2));
  BackboneFeatures f;
  f.s3 = Relu(Conv(x, p.stage3, 2));
  f.s4 = Relu(Conv(f.s3, p.stage4, 2));
  f.s5 = Relu(Conv(f.s4, p.stage5, 2));
  return f;
}

ChangeFeatures EncodeImages(const Tensor& image_t1, const Tensor& image_t2,
                            const ImageEncoderParams& params) {
  if (image_t1.shape() != image_t2.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "t1 and t2 images differ in shape");
  }
  const BackboneFeatures a = RunBackbone(image_t1, params);
  const BackboneFeatures b = RunBackbone(image_t2, params);
  ChangeFeatures out;
  out.c3 = Conv(ConcatChannels({&a.s3, &b.s3}), params.fuse3);
  out.c4 = Conv(ConcatChannels({&a.s4, &b.s4}), params.fuse4);
  out.c5 = Conv(ConcatChannels({&a.s5, &b.s5}), params.fuse5);
  return out;
}

Tensor LanguageGate(const Tensor& c5, const Tensor& sentence, const AggregationParams& p) {
  const Tensor visual = Conv(c5, p.visual5);
  const Tensor text = Linear(sentence, p.text_proj);
  return ScaleChannels(visual, text);
}

AggregationOutput AggregateFeatures(const ChangeFeatures& feats, const Tensor& sentence,
                                    const AggregationParams& p) {
  AggregationOutput out;
  out.gated5 = LanguageGate(feats.c5, sentence, p);

  // Top-down pathway.
  const Tensor inner5 = out.gated5;
  const Tensor inner4 = Add(Conv(feats.c4, p.lateral4), BilinearUpsample(inner5, 2));
  const Tensor inner3 = Add(Conv(feats.c3, p.lateral3), BilinearUpsample(inner4, 2));
  out.m5 = Conv(inner5, p.smooth5);
  out.m4 = Conv(inner4, p.smooth4);
  out.m3 = Conv(inner3, p.smooth3);

  // All three levels meet at stride 16.
  const Tensor from5 = Deconv(Conv(out.m5, p.reduce5), p.up5);
  const Tensor from3 = Conv(out.m3, p.down3, 2);
  out.merged = Conv(ConcatChannels({&from5, &out.m4, &from3}), p.merge);
  out.visual_tokens = ToTokens(out.merged);
  return out;
}

VlDecodeOutput DecodeVisionLanguage(const Tensor& visual, const Tensor& words,
                                    std::span<const VlLayerParams> layers) {
  if (layers.empty()) throw Error(ErrorCode::kShapeMismatch, "no decoder layers");
  VlDecodeOutput out;
  Tensor v = visual;
  for (const auto& layer : layers) {
    auto sa = MultiHeadAttention(v, v, v, layer.self_attn);
    const Tensor v1 = Add(v, sa.output);
    auto ca = MultiHeadAttention(v1, words, words, layer.cross_attn);
    const Tensor f1 = Hadamard(ca.output, v1);
    v = Add(FeedForward(Hadamard(f1, v1), layer.ffn), f1);
    out.self_weights.push_back(std::move(sa.weights));
    out.cross_weights.push_back(std::move(ca.weights));
  }
  out.fused = std::move(v);
  return out;
}

SelectorOutput SelectQuestionAnswer(const Tensor& fused, const Tensor& words) {
  if (fused.rank() != 2 || words.rank() != 2 || fused.dim(1) != words.dim(1)) {
    throw Error(ErrorCode::kShapeMismatch, "selector: F_vl " + ShapeToString(fused.shape()) +
                                               " vs F_w " + ShapeToString(words.shape()));
  }
  SelectorOutput s;
  s.pooled_visual = MeanRows(fused);
  s.pooled_text = MeanRows(words);
  const std::size_t c = fused.dim(1);
  s.alpha = Tensor({c});
  s.beta = Tensor({c});
  s.selection = Tensor({c});
  for (std::size_t i = 0; i < c; ++i) {
    const double v = s.pooled_visual[i];
    const double w = s.pooled_text[i];
    const double ev = std::exp(std::clamp(v, -kSelectorClamp, kSelectorClamp));
    const double ew = std::exp(std::clamp(w, -kSelectorClamp, kSelectorClamp));
    s.alpha[i] = ev / (ev + ew);
    s.beta[i] = 1.0 - s.alpha[i];
    s.selection[i] = s.alpha[i] * v + s.beta[i] * w;
  }
  CheckFinite(s.selection, "SelectQuestionAnswer");
  return s;
}

CoarseMaskOutput CoarseMask(const Tensor& selection, const Tensor& fused, std::size_t h16,
                            std::size_t w16, const PixelDecoderParams& params) {
  CoarseMaskOutput out;
  const Tensor grid = FromTokens(fused, h16, w16);
  out.decoded = Relu(Conv(Relu(Conv(grid, params.conv1)), params.conv2));
  out.gated = ScaleChannels(out.decoded, Sigmoid(selection));
  out.mask = Conv(out.gated, params.project);
  return out;
}

MaskDecodeOutput DecodeMask(const Tensor& coarse, const Tensor& visual, std::size_t h16,
                            std::size_t w16, const MaskDecoderParams& params) {
  RequireShape(coarse, {1, h16, w16}, "DecodeMask coarse mask");
  MaskDecodeOutput out;
  Tensor prompt = ToTokens(Conv(coarse, params.prompt_embed));
  Tensor image = Add(visual, prompt);
  for (const auto& block : params.blocks) {
    auto p2i = MultiHeadAttention(prompt, image, image, block.prompt_to_image);
    prompt = LayerNorm(Add(prompt, p2i.output), block.norm1.gain, block.norm1.bias);
    prompt = LayerNorm(Add(prompt, FeedForward(prompt, block.ffn)), block.norm2.gain,
                       block.norm2.bias);
    auto i2p = MultiHeadAttention(image, prompt, prompt, block.image_to_prompt);
    image = LayerNorm(Add(image, i2p.output), block.norm3.gain, block.norm3.bias);
    out.weights.push_back(std::move(p2i.weights));
    out.weights.push_back(std::move(i2p.weights));
  }
  const Tensor grid = FromTokens(image, h16, w16);
  out.features = Deconv(Relu(Deconv(grid, params.up1)), params.up2);
  out.prompt_tokens = std::move(prompt);
  out.image_tokens = std::move(image);
  return out;
}

DynamicHeadOutput DynamicHead(const Tensor& selection, const Tensor& mask_features,
                              const LinearParams& head, std::size_t kernel_size) {
  if (mask_features.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "mask features must be [C_m x h x w]");
  }
  const std::size_t cm = mask_features.dim(0);
  const std::size_t kernel_values = cm * kernel_size * kernel_size;
  const Tensor raw = Linear(selection, head);
  if (raw.size() != kernel_values + 1) {
    throw Error(ErrorCode::kShapeMismatch, "dynamic head emits " + std::to_string(raw.size()) +
                                               " values, need " +
                                               std::to_string(kernel_values + 1));
  }
  DynamicHeadOutput out;
  std::vector<double> kernel(raw.data().begin(), raw.data().begin() + kernel_values);
  out.kernel = Tensor({1, cm, kernel_size, kernel_size}, std::move(kernel));
  out.bias = raw[kernel_values];
  out.low_res = Conv2d(mask_features, out.kernel, Tensor::Vector({out.bias}), 1,
                       kernel_size / 2);
  out.logits = BilinearUpsample(out.low_res, 4);
  return out;
}

Tensor ClassifierLogits(const Tensor& selection, const ClassifierParams& params) {
  return Linear(Relu(Linear(selection, params.fc1)), params.fc2);
}

Tensor Classify(const Tensor& selection, const ClassifierParams& params) {
  return Softmax(ClassifierLogits(selection, params), 0);
}

double ForwardDiagnostics::MaxRowSumError() const {
  double worst = 0.0;
  for (const auto& [name, w] : attention) {
    const std::size_t keys = w.dim(w.rank() - 1);
    for (std::size_t r = 0; r < w.size() / keys; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < keys; ++k) s += w[r * keys + k];
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return worst;
}

double ForwardDiagnostics::MinWeight() const {
  double lo = 1.0;
  for (const auto& [name, w] : attention) {
    for (double v : w.data()) lo = std::min(lo, v);
  }
  return lo;
}

ForwardOutput Forward(const Tensor& image_t1, const Tensor& image_t2,
                      std::span<const int> tokens, const VistaParams& params,
                      const ModelConfig& config) {
  config.Validate();
  const Shape image_shape{3, config.height, config.width};
  RequireShape(image_t1, image_shape, "Forward image t1");
  RequireShape(image_t2, image_shape, "Forward image t2");
  const std::size_t h16 = config.height / 16, w16 = config.width / 16;

  ForwardOutput out;
  auto& d = out.diagnostics;
  out.text = EncodeText(tokens, params.text, config);
  d.shapes.emplace_back("F_w", out.text.words.shape());
  d.shapes.emplace_back("F_s_sent", out.text.sentence.shape());
  d.attention.emplace_back("text.self", out.text.attention);

  out.change = EncodeImages(image_t1, image_t2, params.image);
  d.shapes.emplace_back("F_c3", out.change.c3.shape());
  d.shapes.emplace_back("F_c4", out.change.c4.shape());
  d.shapes.emplace_back("F_c5", out.change.c5.shape());

  out.aggregation = AggregateFeatures(out.change, out.text.sentence, params.aggregation);
  d.shapes.emplace_back("F_m5", out.aggregation.m5.shape());
  d.shapes.emplace_back("F_m4", out.aggregation.m4.shape());
  d.shapes.emplace_back("F_m3", out.aggregation.m3.shape());
  d.shapes.emplace_back("F_m", out.aggregation.merged.shape());
  d.shapes.emplace_back("F_v", out.aggregation.visual_tokens.shape());

  out.vl = DecodeVisionLanguage(out.aggregation.visual_tokens, out.text.words,
                                params.vl_layers);
  d.shapes.emplace_back("F_vl", out.vl.fused.shape());
  for (std::size_t i = 0; i < out.vl.self_weights.size(); ++i) {
    d.attention.emplace_back("vl." + std::to_string(i) + ".self", out.vl.self_weights[i]);
    d.attention.emplace_back("vl." + std::to_string(i) + ".cross", out.vl.cross_weights[i]);
  }

  out.selector = SelectQuestionAnswer(out.vl.fused, out.text.words);
  d.shapes.emplace_back("F_sel", out.selector.selection.shape());

  out.coarse = CoarseMask(out.selector.selection, out.vl.fused, h16, w16,
                          params.pixel_decoder);
  d.shapes.emplace_back("M_c", out.coarse.mask.shape());

  out.mask_decoder = DecodeMask(out.coarse.mask, out.aggregation.visual_tokens, h16, w16,
                                params.mask_decoder);
  d.shapes.emplace_back("F_M", out.mask_decoder.features.shape());
  for (std::size_t i = 0; i < out.mask_decoder.weights.size(); ++i) {
    d.attention.emplace_back("mask.block" + std::to_string(i / 2) +
                                 (i % 2 == 0 ? ".prompt_to_image" : ".image_to_prompt"),
                             out.mask_decoder.weights[i]);
  }

  out.head = DynamicHead(out.selector.selection, out.mask_decoder.features,
                         params.dynamic_head, config.dyn_kernel);
  d.shapes.emplace_back("M", out.head.logits.shape());

  out.answer_probs = Classify(out.selector.selection, params.classifier);
  d.shapes.emplace_back("answer_probs", out.answer_probs.shape());
  CheckFinite(out.head.logits, "Forward mask logits");
  return out;
}

Tensor MaskToImage(const SemanticMask& mask, std::size_t num_classes) {
  if (num_classes < 2) throw Error(ErrorCode::kInvalidTaxonomy, "need >= 2 classes");
  Tensor img({3, mask.height, mask.width});
  const double denom = static_cast<double>(num_classes - 1);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < mask.height; ++i) {
      for (std::size_t j = 0; j < mask.width; ++j) {
        img.at(ch, i, j) = static_cast<double>(mask.at(i, j)) / denom;
      }
    }
  }
  return img;
}

}  // namespace cdqag
