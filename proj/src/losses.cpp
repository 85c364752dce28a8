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
#include "cdqag/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cdqag/error.hpp"
#include "cdqag/rng.hpp"
#include "cdqag/triplet_engine.hpp"

namespace cdqag {
namespace {

// log(1 + e^z) without overflow.
double Softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double Logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void CheckMaskSize(const BinaryMask& gt, std::size_t height, std::size_t width,
                   const char* what) {
  if (gt.height != height || gt.width != width) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": mask is " + std::to_string(gt.height) + "x" +
                    std::to_string(gt.width) + ", scores are " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
}

Tensor Outer(const Tensor& a, const Tensor& b) {
  Tensor out({a.size(), b.size()});
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out.at(i, j) = a[i] * b[j];
  }
  return out;
}

// W: [in x out], g: [out] -> W g: [in].
Tensor MatVec(const Tensor& w, const Tensor& g) {
  Tensor out({w.dim(0)});
  for (std::size_t i = 0; i < w.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.dim(1); ++j) s += w.at(i, j) * g[j];
    out[i] = s;
  }
  return out;
}

void Step(Tensor& param, const Tensor& grad, double lr) {
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

Tensor RandomTensor(Shape shape, SplitMix64& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.Uniform(lo, hi);
  return t;
}

BinaryMask RandomMask(std::size_t height, std::size_t width, SplitMix64& rng) {
  std::vector<std::uint8_t> grid(height * width);
  for (auto& g : grid) g = static_cast<std::uint8_t>(rng.Below(2));
  return RleEncode(grid, width, height);
}

}  // namespace

LossAndGrad CeLoss(const Tensor& probs, int target) {
  if (probs.rank() != 1 || probs.size() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "CE expects a probability vector");
  }
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
    throw Error(ErrorCode::kBadTarget, "target " + std::to_string(target) + " outside [0, " +
                                           std::to_string(probs.size()) + ")");
  }
  const auto t = static_cast<std::size_t>(target);
  LossAndGrad out;
  out.loss = -std::log(probs[t]);
  out.grad = probs;
  out.grad[t] -= 1.0;
  return out;
}

LossAndGrad BceOnLogits(std::span<const double> logits, std::span<const std::uint8_t> targets) {
  if (logits.size() != targets.size() || logits.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "BCE: " + std::to_string(logits.size()) +
                                                   " logits vs " +
                                                   std::to_string(targets.size()) + " targets");
  }
  const double n = static_cast<double>(logits.size());
  LossAndGrad out;
  out.grad = Tensor({logits.size()});
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = targets[i] ? 1.0 : 0.0;
    // -[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z
    sum += Softplus(z) - y * z;
    out.grad[i] = (Logistic(z) - y) / n;
  }
  out.loss = sum / n;
  return out;
}

LossAndGrad BceLoss(const Tensor& logits, const BinaryMask& gt) {
  if (logits.rank() != 3 || logits.dim(0) != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "BCE expects [1 x H x W] logits, got " +
                                                   ShapeToString(logits.shape()));
  }
  CheckMaskSize(gt, logits.dim(1), logits.dim(2), "BCE");
  LossAndGrad out = BceOnLogits(logits.data(), RleDecode(gt));
  out.grad = out.grad.Reshape(logits.shape());
  return out;
}

ContrastiveLossOutput ContrastiveLoss(const Tensor& text, const Tensor& pixels,
                                      const BinaryMask& gt) {
  if (text.rank() != 1 || pixels.rank() != 3 || pixels.dim(0) != text.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "contrastive: text " +
                                                   ShapeToString(text.shape()) + ", pixels " +
                                                   ShapeToString(pixels.shape()));
  }
  CheckMaskSize(gt, pixels.dim(1), pixels.dim(2), "contrastive");
  const std::size_t c = pixels.dim(0), n = pixels.dim(1) * pixels.dim(2);
  std::vector<double> dots(n, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < n; ++i) dots[i] += text[k] * pixels[k * n + i];
  }
  const LossAndGrad bce = BceOnLogits(dots, RleDecode(gt));

  ContrastiveLossOutput out;
  out.loss = bce.loss;
  out.grad_text = Tensor({c});
  out.grad_pixels = Tensor(pixels.shape());
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += bce.grad[i] * pixels[k * n + i];
      out.grad_pixels[k * n + i] = bce.grad[i] * text[k];
    }
    out.grad_text[k] = s;
  }
  return out;
}

LossBreakdown CompositeLoss(double l_txt, double l_mask, double l_con,
                            const LossWeights& lambdas) {
  LossBreakdown b;
  b.l_txt = l_txt;
  b.l_mask = l_mask;
  b.l_con = l_con;
  b.lambdas = lambdas;
  b.total = lambdas.txt * l_txt + lambdas.mask * l_mask + lambdas.con * l_con;
  return b;
}

void GradCheckReport::Add(GradBlockReport block) {
  pass = pass && block.pass;
  blocks.push_back(std::move(block));
}

double RelativeError(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradBlockReport GradCheck(const std::string& name,
                          const std::function<double(const Tensor&)>& loss,
                          const Tensor& point, const Tensor& analytic, double step,
                          double tolerance, std::size_t max_coords) {
  if (analytic.size() != point.size()) {
    throw Error(ErrorCode::kShapeMismatch, name + ": gradient has " +
                                               std::to_string(analytic.size()) +
                                               " entries, point has " +
                                               std::to_string(point.size()));
  }
  GradBlockReport report;
  report.name = name;
  const std::size_t n = point.size();
  const std::size_t probes = std::min(n, max_coords);
  Tensor probe = point;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t i = p * n / probes;
    const double x = point[i];
    probe[i] = x + step;
    const double up = loss(probe);
    probe[i] = x - step;
    const double down = loss(probe);
    probe[i] = x;
    const double numeric = (up - down) / (2.0 * step);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
      throw Error(ErrorCode::kNonFinite, name + ": non-finite gradient at coordinate " +
                                             std::to_string(i));
    }
    report.max_rel_error = std::max(report.max_rel_error, RelativeError(analytic[i], numeric));
  }
  report.coords_checked = probes;
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

nlohmann::ordered_json GradCheckToJson(const GradCheckReport& report) {
  nlohmann::ordered_json j;
  j["step"] = report.step;
  j["tolerance"] = report.tolerance;
  j["pass"] = report.pass;
  j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : report.blocks) {
    j["blocks"].push_back({{"name", b.name},
                           {"coords_checked", b.coords_checked},
                           {"max_rel_error", b.max_rel_error},
                           {"pass", b.pass}});
  }
  return j;
}

BinaryMask DownsampleMask(const BinaryMask& mask, std::size_t factor) {
  if (factor == 0 || mask.height % factor != 0 || mask.width % factor != 0) {
    throw Error(ErrorCode::kBadFactor, "cannot downsample " + std::to_string(mask.height) +
                                           "x" + std::to_string(mask.width) + " by " +
                                           std::to_string(factor));
  }
  const auto grid = RleDecode(mask);
  const std::size_t h = mask.height / factor, w = mask.width / factor;
  std::vector<std::uint8_t> out(h * w, 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::size_t on = 0;
      for (std::size_t i = 0; i < factor; ++i) {
        for (std::size_t j = 0; j < factor; ++j) {
          on += grid[(r * factor + i) * mask.width + c * factor + j];
        }
      }
      out[r * w + c] = 2 * on >= factor * factor ? 1 : 0;
    }
  }
  return RleEncode(out, w, h);
}

HeadEvaluation EvaluateHeads(const HeadParams& heads, const FitSample& sample,
                             const LossWeights& lambdas) {
  const Tensor& sel = sample.selection;
  const Tensor& feats = sample.mask_features;
  const std::size_t cm = feats.dim(0);
  if (heads.dynamic_head.weight.dim(1) != cm + 1) {
    throw Error(ErrorCode::kShapeMismatch, "head fitting needs a 1x1 dynamic kernel");
  }
  HeadEvaluation out;

  // Textual answer.
  const Tensor pre = Linear(sel, heads.classifier.fc1);
  const Tensor hidden = Relu(pre);
  const Tensor probs = Softmax(Linear(hidden, heads.classifier.fc2), 0);
  const LossAndGrad ce = CeLoss(probs, sample.answer);

  // Visual answer.
  const DynamicHeadOutput dyn = DynamicHead(sel, feats, heads.dynamic_head, 1);
  const LossAndGrad bce = BceLoss(dyn.logits, sample.mask);
  const Tensor text = dyn.kernel.Reshape({cm});
  const ContrastiveLossOutput con = ContrastiveLoss(text, feats, sample.coarse_mask);

  out.losses = CompositeLoss(ce.loss, bce.loss, con.loss, lambdas);

  // Dynamic head: raw = [kernel (C_m), bias].
  const Tensor low_grad = BilinearUpsampleAdjoint(Scale(bce.grad, lambdas.mask), 4);
  const std::size_t n = feats.dim(1) * feats.dim(2);
  Tensor raw_grad({cm + 1});
  for (std::size_t k = 0; k < cm; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += low_grad[i] * feats[k * n + i];
    raw_grad[k] = s + lambdas.con * con.grad_text[k];
  }
  double bias_grad = 0.0;
  for (std::size_t i = 0; i < n; ++i) bias_grad += low_grad[i];
  raw_grad[cm] = bias_grad;
  out.grads.dynamic_head.weight = Outer(sel, raw_grad);
  out.grads.dynamic_head.bias = raw_grad;

  // Classifier MLP.
  const Tensor logit_grad = Scale(ce.grad, lambdas.txt);
  out.grads.classifier.fc2.weight = Outer(hidden, logit_grad);
  out.grads.classifier.fc2.bias = logit_grad;
  Tensor pre_grad = MatVec(heads.classifier.fc2.weight, logit_grad);
  for (std::size_t i = 0; i < pre_grad.size(); ++i) {
    if (pre[i] <= 0.0) pre_grad[i] = 0.0;
  }
  out.grads.classifier.fc1.weight = Outer(sel, pre_grad);
  out.grads.classifier.fc1.bias = pre_grad;
  return out;
}

SyntheticSample MakeSyntheticSample(std::uint64_t seed) {
  SplitMix64 rng(DeriveSeed(seed, "synthetic"));
  const ClassTaxonomy taxonomy = DefaultTaxonomy();
  const TemplateBank bank = DefaultTemplateBank();
  const TextVocabulary text_vocab = BuildTextVocabulary(taxonomy, bank);
  const AnswerVocabulary answers(taxonomy);

  SyntheticSample s;
  s.config.text_vocab_size = text_vocab.size();
  s.config.answer_vocab_size = answers.size();
  s.config.seed = DeriveSeed(seed, "model");
  const std::size_t h = s.config.height, w = s.config.width, block = 8;

  // Blocky scene with four classes; a quarter of the blocks change class.
  s.pair.pair_id = "synthetic";
  s.pair.t1 = {w, h, std::vector<ClassId>(w * h)};
  s.pair.t2 = s.pair.t1;
  for (std::size_t br = 0; br < h / block; ++br) {
    for (std::size_t bc = 0; bc < w / block; ++bc) {
      const auto before = static_cast<ClassId>(rng.Below(4));
      auto after = before;
      if (rng.Below(4) == 0) after = static_cast<ClassId>((before + 1 + rng.Below(3)) % 4);
      for (std::size_t i = 0; i < block; ++i) {
        for (std::size_t j = 0; j < block; ++j) {
          const std::size_t idx = (br * block + i) * w + bc * block + j;
          s.pair.t1.labels[idx] = before;
          s.pair.t2.labels[idx] = after;
        }
      }
    }
  }

  const auto triplets = GenerateTriplets(s.pair, taxonomy, {}, seed, bank);
  std::vector<const Triplet*> grounded;
  for (const auto& t : triplets) {
    if (!t.mask.IsEmpty()) grounded.push_back(&t);
  }
  if (grounded.empty()) throw Error(ErrorCode::kEmptyDataset, "synthetic pair has no change");
  s.triplet = *grounded[rng.Below(grounded.size())];

  s.params = InitParams(s.config);
  const auto tokens = text_vocab.Tokenize(s.triplet.question, s.config.max_tokens - 2);
  const ForwardOutput fwd =
      Forward(MaskToImage(s.pair.t1, taxonomy.size()), MaskToImage(s.pair.t2, taxonomy.size()),
              tokens, s.params, s.config);
  s.fit.selection = fwd.selector.selection;
  s.fit.mask_features = fwd.mask_decoder.features;
  s.fit.answer = static_cast<int>(*answers.IndexOf(s.triplet.answer));
  s.fit.mask = s.triplet.mask;
  s.fit.coarse_mask = DownsampleMask(s.triplet.mask, 4);
  return s;
}

std::vector<LossBreakdown> MicroFit(HeadParams& heads, const FitSample& sample,
                                    const MicroFitOptions& options) {
  std::vector<LossBreakdown> trace;
  trace.reserve(options.steps + 1);
  for (std::size_t step = 0;; ++step) {
    HeadEvaluation eval;
    try {
      eval = EvaluateHeads(heads, sample, options.lambdas);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      throw Error(ErrorCode::kDivergence, "non-finite value at step " + std::to_string(step));
    }
    if (!std::isfinite(eval.losses.total)) {
      throw Error(ErrorCode::kDivergence, "loss is non-finite at step " + std::to_string(step));
    }
    trace.push_back(eval.losses);
    if (step == options.steps) break;
    Step(heads.dynamic_head.weight, eval.grads.dynamic_head.weight, options.lr);
    Step(heads.dynamic_head.bias, eval.grads.dynamic_head.bias, options.lr);
    Step(heads.classifier.fc1.weight, eval.grads.classifier.fc1.weight, options.lr);
    Step(heads.classifier.fc1.bias, eval.grads.classifier.fc1.bias, options.lr);
    Step(heads.classifier.fc2.weight, eval.grads.classifier.fc2.weight, options.lr);
    Step(heads.classifier.fc2.bias, eval.grads.classifier.fc2.bias, options.lr);
  }
  return trace;
}

std::string TraceToCsv(std::span<const LossBreakdown> trace) {
  std::string out = "step,l_txt,l_mask,l_con,total\n";
  char line[160];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& b = trace[i];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", i, b.l_txt, b.l_mask,
                  b.l_con, b.total);
    out += line;
  }
  return out;
}

GradCheckReport RunGradCheckSuite(std::uint64_t seed, std::size_t instances, double step,
                                  double tolerance) {
  GradCheckReport report;
  report.step = step;
  report.tolerance = tolerance;
  auto merge = [&](GradBlockReport& acc, const GradBlockReport& b) {
    acc.coords_checked += b.coords_checked;
    acc.max_rel_error = std::max(acc.max_rel_error, b.max_rel_error);
  };
  GradBlockReport ce{"ce.logits"}, bce{"bce.logits"}, con_text{"contrastive.text"},
      con_pixels{"contrastive.pixels"};
  for (std::size_t n = 0; n < instances; ++n) {
    SplitMix64 rng(DeriveSeed(seed, "gradcheck/" + std::to_string(n)));

    const std::size_t classes = 2 + rng.Below(9);
    const Tensor logits = RandomTensor({classes}, rng, -3.0, 3.0);
    const int target = static_cast<int>(rng.Below(classes));
    const auto ce_loss = [&](const Tensor& z) { return CeLoss(Softmax(z, 0), target).loss; };
    merge(ce, GradCheck("ce", ce_loss, logits,
                        CeLoss(Softmax(logits, 0), target).grad, step, tolerance));

    const std::size_t h = 2 + rng.Below(4), w = 2 + rng.Below(4);
    const Tensor mask_logits = RandomTensor({1, h, w}, rng, -3.0, 3.0);
    const BinaryMask gt = RandomMask(h, w, rng);
    const auto bce_loss = [&](const Tensor& z) { return BceLoss(z, gt).loss; };
    merge(bce, GradCheck("bce", bce_loss, mask_logits, BceLoss(mask_logits, gt).grad, step,
                         tolerance));

    // Eight pixels as a 2x4 grid.
    const std::size_t c = 2 + rng.Below(7);
    const Tensor text = RandomTensor({c}, rng, -1.0, 1.0);
    const Tensor pixels = RandomTensor({c, 2, 4}, rng, -1.0, 1.0);
    const BinaryMask pix_gt = RandomMask(2, 4, rng);
    const ContrastiveLossOutput con = ContrastiveLoss(text, pixels, pix_gt);
    merge(con_text, GradCheck("con.text",
                              [&](const Tensor& t) {
                                return ContrastiveLoss(t, pixels, pix_gt).loss;
                              },
                              text, con.grad_text, step, tolerance));
    merge(con_pixels, GradCheck("con.pixels",
                                [&](const Tensor& p) {
                                  return ContrastiveLoss(text, p, pix_gt).loss;
                                },
                                pixels, con.grad_pixels, step, tolerance));
  }
  for (auto* b : {&ce, &bce, &con_text, &con_pixels}) {
    b->pass = b->max_rel_error <= tolerance;
    report.Add(*b);
  }

  // Composite loss through the output heads on a small random problem.
  SplitMix64 rng(DeriveSeed(seed, "gradcheck/heads"));
  const std::size_t c = 8, cm = 4, answers = 6;
  ParamInitializer init(DeriveSeed(seed, "gradcheck/init"));
  HeadParams heads{init.MakeLinear(c, cm + 1),
                   {init.MakeLinear(c, c), init.MakeLinear(c, answers)}};
  FitSample sample;
  sample.selection = RandomTensor({c}, rng, -1.0, 1.0);
  sample.mask_features = RandomTensor({cm, 2, 2}, rng, -1.0, 1.0);
  sample.answer = static_cast<int>(rng.Below(answers));
  sample.mask = RandomMask(8, 8, rng);
  sample.coarse_mask = DownsampleMask(sample.mask, 4);
  const LossWeights lambdas;
  const HeadEvaluation eval = EvaluateHeads(heads, sample, lambdas);
  auto check = [&](const char* name, Tensor& param, const Tensor& grad) {
    const Tensor saved = param;
    auto closure = [&](const Tensor& x) {
      param = x;
      const double v = EvaluateHeads(heads, sample, lambdas).losses.total;
      param = saved;
      return v;
    };
    report.Add(GradCheck(name, closure, saved, grad, step, tolerance));
  };
  check("heads.dynamic.weight", heads.dynamic_head.weight, eval.grads.dynamic_head.weight);
  check("heads.dynamic.bias", heads.dynamic_head.bias, eval.grads.dynamic_head.bias);
  check("heads.classifier.fc1.weight", heads.classifier.fc1.weight,
        eval.grads.classifier.fc1.weight);
  check("heads.classifier.fc1.bias", heads.classifier.fc1.bias, eval.grads.classifier.fc1.bias);
  check("heads.classifier.fc2.weight", heads.classifier.fc2.weight,
        eval.grads.classifier.fc2.weight);
  check("heads.classifier.fc2.bias", heads.classifier.fc2.bias, eval.grads.classifier.fc2.bias);
  return report;
}

}  // namespace cdqag
