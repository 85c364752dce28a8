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

#include <cmath>
#include <set>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace cdqag {
namespace {

using ::cdqag::testing::CodeOf;
using ::cdqag::testing::RandomTensor;

BinaryMask RandomBits(SplitMix64& rng, std::size_t w, std::size_t h) {
  std::vector<std::uint8_t> g(w * h);
  for (auto& v : g) v = rng.Below(2);
  return RleEncode(g, w, h);
}

TEST(CeLossTest, Examples) {
  EXPECT_EQ(CeLoss(Tensor::Vector({0, 1, 0}), 1).loss, 0.0);
  EXPECT_NEAR(CeLoss(Tensor::Vector({0.25, 0.25, 0.25, 0.25}), 2).loss, std::log(4.0), 1e-15);
  const auto g = CeLoss(Tensor::Vector({0.1, 0.7, 0.2}), 1).grad;
  EXPECT_NEAR(g[0], 0.1, 1e-15);
  EXPECT_NEAR(g[1], -0.3, 1e-15);
  EXPECT_EQ(CodeOf([] { CeLoss(Tensor::Vector({0.5, 0.5}), 2); }), ErrorCode::kBadTarget);
  EXPECT_EQ(CodeOf([] { CeLoss(Tensor::Vector({0.5, 0.5}), -1); }), ErrorCode::kBadTarget);
}

TEST(CeLossTest, GradientMatchesFiniteDifferences) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = RandomTensor({7}, rng, -3, 3);
    const int t = static_cast<int>(rng.Below(7));
    const auto analytic = CeLoss(Softmax(z, 0), t).grad;
    const auto block = GradCheck(
        "ce", [&](const Tensor& x) { return CeLoss(Softmax(x, 0), t).loss; }, z, analytic);
    EXPECT_TRUE(block.pass);
    EXPECT_LE(block.max_rel_error, 1e-6);
  }
}

TEST(BceLossTest, Examples) {
  SplitMix64 rng(2);
  const auto gt = RandomBits(rng, 5, 3);
  EXPECT_NEAR(BceLoss(Tensor({1, 3, 5}), gt).loss, std::log(2.0), 1e-15);
  const auto full = RleEncode(std::vector<std::uint8_t>(4, 1), 2, 2);
  EXPECT_LT(BceLoss(Tensor({1, 2, 2}, 30.0), full).loss, 1e-12);
  EXPECT_GE(BceLoss(Tensor({1, 2, 2}, -800.0), full).loss, 799.0);
  EXPECT_EQ(CodeOf([&] { BceLoss(Tensor({1, 2, 2}), gt); }), ErrorCode::kDimensionMismatch);
}

TEST(BceLossTest, GradientMatchesFiniteDifferences) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = RandomBits(rng, 6, 4);
    const auto z = RandomTensor({1, 4, 6}, rng, -4, 4);
    const auto r = BceLoss(z, gt);
    const auto dense = RleDecode(gt);
    for (std::size_t i = 0; i < z.size(); ++i) {
      ASSERT_NEAR(r.grad[i], (1 / (1 + std::exp(-z[i])) - dense[i]) / 24.0, 1e-15);
    }
    const auto block = GradCheck(
        "bce", [&](const Tensor& x) { return BceLoss(x, gt).loss; }, z, r.grad);
    EXPECT_LE(block.max_rel_error, 1e-6);
  }
}

TEST(ContrastiveLossTest, Examples) {
  SplitMix64 rng(4);
  const auto gt = RandomBits(rng, 4, 2);
  const auto pixels = RandomTensor({3, 2, 4}, rng);
  EXPECT_NEAR(ContrastiveLoss(Tensor({3}), pixels, gt).loss, std::log(2.0), 1e-15);

  // Separated instance: dot = +s on P, -s on N.
  const auto dense = RleDecode(gt);
  Tensor sep({1, 2, 4});
  for (std::size_t i = 0; i < 8; ++i) sep[i] = dense[i] ? 1.0 : -1.0;
  double prev = 1e9;
  for (double s : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const double l = ContrastiveLoss(Tensor::Vector({s}), sep, gt).loss;
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-12);
  EXPECT_EQ(CodeOf([&] { ContrastiveLoss(Tensor({2}), pixels, gt); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(CodeOf([&] { ContrastiveLoss(Tensor({3}), pixels, RandomBits(rng, 2, 2)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(ContrastiveLossTest, EqualsBceOnDotProducts) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = RandomBits(rng, 4, 2);
    const auto text = RandomTensor({5}, rng);
    const auto pixels = RandomTensor({5, 2, 4}, rng);
    Tensor dots({1, 2, 4});
    for (std::size_t p = 0; p < 8; ++p) {
      for (std::size_t c = 0; c < 5; ++c) dots[p] += text[c] * pixels[c * 8 + p];
    }
    ASSERT_NEAR(ContrastiveLoss(text, pixels, gt).loss, BceLoss(dots, gt).loss, 1e-12);
  }
}

TEST(ContrastiveLossTest, GradientsMatchFiniteDifferences) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = RandomBits(rng, 4, 2);
    const auto text = RandomTensor({6}, rng);
    const auto pixels = RandomTensor({6, 2, 4}, rng);
    const auto out = ContrastiveLoss(text, pixels, gt);
    EXPECT_LE(GradCheck("t", [&](const Tensor& x) { return ContrastiveLoss(x, pixels, gt).loss; },
                        text, out.grad_text)
                  .max_rel_error,
              1e-6);
    EXPECT_LE(GradCheck("p", [&](const Tensor& x) { return ContrastiveLoss(text, x, gt).loss; },
                        pixels, out.grad_pixels)
                  .max_rel_error,
              1e-6);
  }
}

TEST(CompositeLossTest, Weights) {
  const LossWeights d;
  EXPECT_EQ(d.txt, 0.2);
  EXPECT_EQ(d.mask, 1.0);
  EXPECT_EQ(d.con, 1.0);
  const auto b = CompositeLoss(1.5, 0.7, 0.3);
  EXPECT_EQ(b.total, 0.2 * 1.5 + 1.0 * 0.7 + 1.0 * 0.3);
  EXPECT_EQ(CompositeLoss(1.5, 0.7, 0.3, {0.2, 0.0, 0.0}).total, 0.2 * 1.5);
  EXPECT_EQ(CompositeLoss(0, 0, 0).total, 0.0);
  // Linear in each weight.
  const double t1 = CompositeLoss(1.5, 0.7, 0.3, {0.2, 1.0, 1.0}).total;
  const double t2 = CompositeLoss(1.5, 0.7, 0.3, {0.4, 1.0, 1.0}).total;
  const double t3 = CompositeLoss(1.5, 0.7, 0.3, {0.6, 1.0, 1.0}).total;
  EXPECT_NEAR(t3 - t2, t2 - t1, 1e-15);
}

TEST(GradCheckTest, QuadraticAndNegativeControl) {
  SplitMix64 rng(7);
  const auto x = RandomTensor({40}, rng);
  auto half_norm = [](const Tensor& t) { return 0.5 * Dot(t, t); };
  const auto ok = GradCheck("quad", half_norm, x, x);
  EXPECT_TRUE(ok.pass);
  EXPECT_LE(ok.max_rel_error, 1e-8);
  EXPECT_EQ(ok.coords_checked, 40u);
  const auto bad = GradCheck("quad", half_norm, x, Scale(x, 1.1));
  EXPECT_FALSE(bad.pass);
  EXPECT_NEAR(bad.max_rel_error, 0.1 / 1.1, 1e-6);
  const auto big = RandomTensor({1000}, rng);
  EXPECT_EQ(GradCheck("big", half_norm, big, big).coords_checked, kGradCheckMaxCoords);
  EXPECT_EQ(RelativeError(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(RelativeError(2.0, 1.0), 0.5);
  EXPECT_EQ(CodeOf([&] {
              GradCheck("nan", [](const Tensor&) { return std::nan(""); }, x, x);
            }),
            ErrorCode::kNonFinite);
}

TEST(DownsampleMaskTest, MajorityVote) {
  const auto m = RleEncode(std::vector<std::uint8_t>{1, 1, 0, 0,  //
                                                     1, 0, 0, 1,  //
                                                     0, 0, 1, 1,  //
                                                     0, 0, 1, 1},
                           4, 4);
  EXPECT_EQ(RleDecode(DownsampleMask(m, 2)), (std::vector<std::uint8_t>{1, 0, 0, 1}));
}

TEST(HeadsTest, EveryBlockPassesGradCheck) {
  const auto report = RunGradCheckSuite(11, 5);
  EXPECT_TRUE(report.pass);
  std::set<std::string> names;
  for (const auto& b : report.blocks) {
    names.insert(b.name);
    EXPECT_LE(b.max_rel_error, kGradCheckTolerance) << b.name;
  }
  for (const char* n : {"ce.logits", "bce.logits", "contrastive.text", "contrastive.pixels",
                        "heads.dynamic.weight", "heads.dynamic.bias",
                        "heads.classifier.fc1.weight", "heads.classifier.fc2.bias"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
  const auto json = GradCheckToJson(report);
  EXPECT_TRUE(json.contains("blocks"));
}

TEST(MicroFitTest, HalvesTheLossAndIsReproducible) {
  const auto sample = MakeSyntheticSample(42);
  EXPECT_FALSE(sample.triplet.mask.IsEmpty());
  HeadParams a{sample.params.dynamic_head, sample.params.classifier};
  HeadParams b = a;
  const auto trace = MicroFit(a, sample.fit);
  ASSERT_EQ(trace.size(), 201u);
  EXPECT_LE(trace.back().total, 0.5 * trace.front().total);
  for (const auto& step : trace) {
    EXPECT_GE(step.l_txt, 0.0);
    EXPECT_GE(step.l_mask, 0.0);
    EXPECT_GE(step.l_con, 0.0);
    EXPECT_EQ(step.total, 0.2 * step.l_txt + step.l_mask + step.l_con);
  }
  const auto again = MicroFit(b, sample.fit);
  EXPECT_EQ(TraceToCsv(again), TraceToCsv(trace));
  EXPECT_EQ(a.classifier.fc2.weight, b.classifier.fc2.weight);
  EXPECT_EQ(TraceToCsv(trace).substr(0, 27), "step,l_txt,l_mask,l_con,tot");
}

TEST(MicroFitTest, ZeroLearningRateIsFlat) {
  const auto sample = MakeSyntheticSample(3);
  HeadParams heads{sample.params.dynamic_head, sample.params.classifier};
  MicroFitOptions o;
  o.steps = 10;
  o.lr = 0.0;
  const auto trace = MicroFit(heads, sample.fit, o);
  ASSERT_EQ(trace.size(), 11u);
  for (const auto& s : trace) EXPECT_EQ(s.total, trace.front().total);
}

TEST(MicroFitTest, DivergenceIsReported) {
  const auto sample = MakeSyntheticSample(3);
  HeadParams heads{sample.params.dynamic_head, sample.params.classifier};
  MicroFitOptions o;
  o.steps = 200;
  o.lr = 1e200;
  EXPECT_EQ(CodeOf([&] { MicroFit(heads, sample.fit, o); }), ErrorCode::kDivergence);
}

}  // namespace
}  // namespace cdqag
