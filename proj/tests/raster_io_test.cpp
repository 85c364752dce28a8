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
#include "cdqag/raster_io.hpp"

#include <fstream>

#include "cdqag/error.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace cdqag {
namespace {

using ::cdqag::testing::TempDir;

template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

TEST(TaxonomyTest, RejectsBadNames) {
  EXPECT_EQ(CodeOf([] { ClassTaxonomy({"a"}); }), ErrorCode::kInvalidTaxonomy);
  EXPECT_EQ(CodeOf([] { ClassTaxonomy({"a", "a"}); }), ErrorCode::kInvalidTaxonomy);
  EXPECT_EQ(CodeOf([] { ClassTaxonomy({"a", "Bad"}); }), ErrorCode::kInvalidTaxonomy);
  EXPECT_EQ(CodeOf([] { ClassTaxonomy({"a", ""}); }), ErrorCode::kInvalidTaxonomy);
  ClassTaxonomy ok({"background", "low_vegetation"});
  EXPECT_EQ(ok.IdOf("low_vegetation"), 1u);
  EXPECT_EQ(ok.IdOf("missing"), 2u);
}

TEST(TaxonomyTest, DefaultHasTenPlaceholderClasses) {
  const auto t = DefaultTaxonomy();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t.name(0), "background");
  EXPECT_EQ(t.name(9), "other");
  EXPECT_EQ(TaxonomyFromJson(TaxonomyToJson(t)).names(), t.names());
}

TEST(PgmTest, ParsesAsciiExample) {
  const auto m = ParsePgm("P2 2 2 255\n0 0 1 1\n", 2);
  EXPECT_EQ(m.width, 2u);
  EXPECT_EQ(m.height, 2u);
  EXPECT_EQ(m.labels, (std::vector<ClassId>{0, 0, 1, 1}));
}

TEST(PgmTest, SkipsComments) {
  const auto m = ParsePgm("P2\n# note\n3 1\n# more\n255\n2 1 0\n", 3);
  EXPECT_EQ(m.labels, (std::vector<ClassId>{2, 1, 0}));
}

TEST(PgmTest, RejectsOutOfRangeClass) {
  EXPECT_EQ(CodeOf([] { ParsePgm("P2 2 2 255\n0 7 1 1\n", 5); }),
            ErrorCode::kClassIdOutOfRange);
}

TEST(PgmTest, RejectsMalformedHeaders) {
  EXPECT_EQ(CodeOf([] { ParsePgm("P3 2 2 255\n0 0 0 0", 2); }), ErrorCode::kMalformedFile);
  EXPECT_EQ(CodeOf([] { ParsePgm("P2 2 2 255\n0 0 0", 2); }), ErrorCode::kMalformedFile);
  EXPECT_EQ(CodeOf([] { ParsePgm("P2 0 2 255\n", 2); }), ErrorCode::kEmptyImage);
}

TEST(PgmTest, FuzzRejectsEveryInvalidPixel) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.Below(20);
    const std::size_t w = 1 + rng.Below(6), h = 1 + rng.Below(6);
    std::vector<int> px(w * h);
    for (auto& p : px) p = static_cast<int>(rng.Below(k));
    px[rng.Below(px.size())] = static_cast<int>(k + rng.Below(256 - k));
    std::string text = "P2 " + std::to_string(w) + " " + std::to_string(h) + " 255\n";
    for (int p : px) text += std::to_string(p) + " ";
    EXPECT_EQ(CodeOf([&] { ParsePgm(text, k); }), ErrorCode::kClassIdOutOfRange);
  }
}

TEST(PgmTest, ReadsIndependentlyWrittenBinaryFile) {
  // 64x64 P5 file written byte by byte here, not through SaveMask.
  const auto dir = TempDir("pgm");
  const auto path = dir / "zeros.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n64 64\n255\n";
    out << std::string(64 * 64, '\0');
  }
  const auto mask = LoadMask(path, DefaultTaxonomy());
  EXPECT_EQ(mask.labels, std::vector<ClassId>(4096, 0));
}

TEST(PgmTest, SaveLoadRoundTrip) {
  const auto dir = TempDir("pgm_rt");
  SplitMix64 rng(3);
  SemanticMask m{7, 5, std::vector<ClassId>(35)};
  for (auto& v : m.labels) v = static_cast<ClassId>(rng.Below(10));
  SaveMask(dir / "m.pgm", m);
  const auto back = LoadMask(dir / "m.pgm", DefaultTaxonomy());
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.width, 7u);
  EXPECT_EQ(back.height, 5u);
}

TEST(PgmTest, DiscoversOnlyCompletePairs) {
  const auto dir = TempDir("discover");
  SemanticMask m{2, 2, {0, 1, 1, 0}};
  SaveMask(dir / "b_t1.pgm", m);
  SaveMask(dir / "b_t2.pgm", m);
  SaveMask(dir / "a_t1.pgm", m);
  SaveMask(dir / "a_t2.pgm", m);
  SaveMask(dir / "lonely_t1.pgm", m);
  EXPECT_EQ(DiscoverPairs(dir), (std::vector<std::string>{"a", "b"}));
}

TEST(PgmTest, PairSizesMustMatch) {
  const auto dir = TempDir("pair_size");
  SaveMask(dir / "p_t1.pgm", SemanticMask{2, 2, {0, 0, 0, 0}});
  SaveMask(dir / "p_t2.pgm", SemanticMask{3, 1, {0, 0, 0}});
  EXPECT_EQ(CodeOf([&] { LoadPair(dir, "p", DefaultTaxonomy()); }), ErrorCode::kDimensionMismatch);
}

TEST(RleTest, SpecExamples) {
  const std::vector<std::uint8_t> zeros{0, 0, 0, 0}, ones{1, 1, 1, 1}, mid{0, 1, 1, 0};
  EXPECT_EQ(RleEncode(zeros, 2, 2).runs, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(RleEncode(ones, 2, 2).runs, (std::vector<std::uint64_t>{0, 4}));
  EXPECT_EQ(RleEncode(mid, 2, 2).runs, (std::vector<std::uint64_t>{1, 2, 1}));
  EXPECT_EQ(RleDecode(BinaryMask{2, 2, {4}}), zeros);
  EXPECT_EQ(RleDecode(BinaryMask{2, 2, {0, 4}}), ones);
  EXPECT_EQ(RleDecode(BinaryMask{2, 2, {1, 2, 1}}), mid);
}

TEST(RleTest, Errors) {
  const std::vector<std::uint8_t> three{0, 1, 0};
  EXPECT_EQ(CodeOf([&] { RleEncode(three, 2, 2); }), ErrorCode::kSizeMismatch);
  EXPECT_EQ(CodeOf([] { RleDecode(BinaryMask{2, 2, {1, 2}}); }), ErrorCode::kInvalidRuns);
}

TEST(RleTest, RoundTripOnThousandRandomGrids) {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t w = 1 + rng.Below(64), h = 1 + rng.Below(64);
    const double density = rng.Uniform();
    std::vector<std::uint8_t> grid(w * h);
    for (auto& g : grid) g = rng.Uniform() < density ? 1 : 0;
    const auto enc = RleEncode(grid, w, h);
    ASSERT_EQ(RleDecode(enc), grid);
    ASSERT_EQ(RleEncode(grid, w, h), enc);
    std::uint64_t on = 0;
    for (auto g : grid) on += g;
    ASSERT_EQ(enc.Popcount(), on);
    // Only the leading run may be empty.
    for (std::size_t i = 1; i < enc.runs.size(); ++i) ASSERT_GT(enc.runs[i], 0u);
  }
}

TEST(RleTest, JsonRoundTrip) {
  const BinaryMask m{3, 2, {1, 2, 3}};
  const auto j = MaskToJson(m);
  EXPECT_EQ(j.dump(), R"({"size":[2,3],"counts":[1,2,3]})");
  EXPECT_EQ(MaskFromJson(j), m);
  EXPECT_EQ(CodeOf([] { MaskFromJson(nlohmann::json::parse(R"({"size":[2,2],"counts":[-1,5]})")); }),
            ErrorCode::kInvalidRuns);
}

}  // namespace
}  // namespace cdqag
