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
#ifndef CDQAG_LOSSES_HPP_
#define CDQAG_LOSSES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdqag/layers.hpp"
#include "cdqag/raster_io.hpp"
#include "cdqag/tensor.hpp"
#include "cdqag/vista_model.hpp"
#include "json.hpp"

namespace cdqag {

struct LossWeights {
  double txt = 0.2;
  double mask = 1.0;
  double con = 1.0;
};

struct LossBreakdown {
  double l_txt = 0.0;
  double l_mask = 0.0;
  double l_con = 0.0;
  double total = 0.0;
  LossWeights lambdas;
};

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

// -log probs[target]; the gradient is taken with respect to the pre-softmax
// logits and equals probs - onehot(target).
LossAndGrad CeLoss(const Tensor& probs, int target);

// Mean per-pixel logistic loss of [1 x H x W] logits against gt.
LossAndGrad BceLoss(const Tensor& logits, const BinaryMask& gt);

// Mean logistic loss of raw logits against 0/1 targets; the shared kernel of
// BceLoss and ContrastiveLoss.
LossAndGrad BceOnLogits(std::span<const double> logits, std::span<const std::uint8_t> targets);

struct ContrastiveLossOutput {
  double loss = 0.0;
  Tensor grad_text;    // [C_m]
  Tensor grad_pixels;  // [C_m x H' x W']
};

// Per-pixel logistic loss on text . pixel dot products, mean over pixels.
ContrastiveLossOutput ContrastiveLoss(const Tensor& text, const Tensor& pixels,
                                      const BinaryMask& gt);

LossBreakdown CompositeLoss(double l_txt, double l_mask, double l_con,
                            const LossWeights& lambdas = {});

// ---------------------------------------------------------------------------
// Finite-difference checking

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-5;
inline constexpr std::size_t kGradCheckMaxCoords = 256;

struct GradBlockReport {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  double step = kGradCheckStep;
  double tolerance = kGradCheckTolerance;
  std::vector<GradBlockReport> blocks;
  bool pass = true;  // every block passed

  void Add(GradBlockReport block);
};

double RelativeError(double analytic, double numeric);

// Compares `analytic` with central differences of `loss` around `point`. At
// most max_coords evenly spaced coordinates are probed.
GradBlockReport GradCheck(const std::string& name,
                          const std::function<double(const Tensor&)>& loss,
                          const Tensor& point, const Tensor& analytic,
                          double step = kGradCheckStep, double tolerance = kGradCheckTolerance,
                          std::size_t max_coords = kGradCheckMaxCoords);

nlohmann::ordered_json GradCheckToJson(const GradCheckReport& report);

// ---------------------------------------------------------------------------
// Head-only fitting

// Trainable output heads; everything upstream is frozen.
struct HeadParams {
  LinearParams dynamic_head;
  ClassifierParams classifier;
};

struct HeadGradients {
  LinearParams dynamic_head;
  ClassifierParams classifier;
};

struct FitSample {
  Tensor selection;      // F_sel: [C]
  Tensor mask_features;  // F~_M: [C_m x H/4 x W/4]
  int answer = 0;        // answer-vocabulary index
  BinaryMask mask;       // full-resolution grounding mask
  BinaryMask coarse_mask;  // mask at the F~_M resolution
};

// Majority vote over each factor x factor block (on iff at least half on).
BinaryMask DownsampleMask(const BinaryMask& mask, std::size_t factor);

struct HeadEvaluation {
  LossBreakdown losses;
  HeadGradients grads;
};

// Composite loss of the heads on one sample with gradients for every head
// parameter. Requires a 1x1 dynamic kernel.
HeadEvaluation EvaluateHeads(const HeadParams& heads, const FitSample& sample,
                             const LossWeights& lambdas);

struct SyntheticSample {
  ModelConfig config;
  VistaParams params;
  MaskPair pair;
  Triplet triplet;
  FitSample fit;
};

// Seeded random pair, one generated triplet with a non-empty mask, and the
// frozen features of a seeded model run on it.
SyntheticSample MakeSyntheticSample(std::uint64_t seed);

struct MicroFitOptions {
  std::size_t steps = 200;
  double lr = 0.05;
  LossWeights lambdas;
};

// Plain gradient descent on the heads; trace[i] is the loss before step i and
// the last entry is the loss after the final step. Throws Divergence on a
// non-finite loss.
std::vector<LossBreakdown> MicroFit(HeadParams& heads, const FitSample& sample,
                                    const MicroFitOptions& options = {});

std::string TraceToCsv(std::span<const LossBreakdown> trace);

// Checks CE, BCE, the contrastive loss and every head block of the composite
// loss on `instances` seeded random problems each.
GradCheckReport RunGradCheckSuite(std::uint64_t seed, std::size_t instances,
                                  double step = kGradCheckStep,
                                  double tolerance = kGradCheckTolerance);

}  // namespace cdqag

#endif  // CDQAG_LOSSES_HPP_
