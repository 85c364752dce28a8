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
#include "cdqag/change_analysis.hpp"

#include "cdqag/error.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace cdqag {
namespace {

using ::cdqag::testing::RandomPair;

using Counts = std::vector<std::uint64_t>;

MaskPair TwoByTwo() {
  MaskPair p;
  p.pair_id = "ex";
  p.t1 = {2, 2, {0, 0, 1, 1}};
  p.t2 = {2, 2, {0, 1, 1, 1}};
  return p;
}

std::vector<std::uint8_t> Bits(const BinaryMask& m) { return RleDecode(m); }

TEST(TransitionMatrixTest, TwoByTwoExample) {
  const auto tm = ComputeTransitionMatrix(TwoByTwo(), 2);
  EXPECT_EQ(tm(0, 0), 1u);
  EXPECT_EQ(tm(0, 1), 1u);
  EXPECT_EQ(tm(1, 0), 0u);
  EXPECT_EQ(tm(1, 1), 2u);
  EXPECT_EQ(tm.total(), 4u);
}

TEST(TransitionMatrixTest, IdenticalMasksGiveDiagonal) {
  SplitMix64 rng(1);
  auto p = RandomPair(rng, 9, 7, 5);
  p.t2 = p.t1;
  const auto tm = ComputeTransitionMatrix(p, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (i != j) EXPECT_EQ(tm(i, j), 0u);
    }
  }
  const auto s = Summarize(tm);
  EXPECT_EQ(s.changed, Counts(5, 0));
  EXPECT_EQ(s.gained, Counts(5, 0));
  EXPECT_EQ(s.lost, Counts(5, 0));
}

TEST(TransitionMatrixTest, MatchesPixelLoop) {
  SplitMix64 rng(16);
  const auto p = RandomPair(rng, 16, 16, 5);
  const auto tm = ComputeTransitionMatrix(p, 5);
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      std::uint64_t n = 0;
      for (std::size_t q = 0; q < 256; ++q) n += p.t1.labels[q] == i && p.t2.labels[q] == j;
      EXPECT_EQ(tm(i, j), n);
      sum += tm(i, j);
    }
  }
  EXPECT_EQ(sum, 256u);
}

TEST(TransitionMatrixTest, DimensionMismatch) {
  MaskPair p = TwoByTwo();
  p.t2 = {4, 1, {0, 0, 0, 0}};
  try {
    ComputeTransitionMatrix(p, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(SummaryTest, TwoByTwoExample) {
  const auto s = Summarize(ComputeTransitionMatrix(TwoByTwo(), 2));
  EXPECT_EQ(s.area_t1, (Counts{2, 2}));
  EXPECT_EQ(s.area_t2, (Counts{1, 3}));
  EXPECT_EQ(s.gained, (Counts{0, 1}));
  EXPECT_EQ(s.lost, (Counts{1, 0}));
  EXPECT_EQ(s.changed, (Counts{1, 1}));
}

TEST(SummaryTest, AreaIdentityOnThousandRandomMatrices) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.Below(9);
    TransitionMatrix tm(k, 0);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        tm(i, j) = rng.Below(50);
        total += tm(i, j);
      }
    }
    TransitionMatrix sized(k, total);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) sized(i, j) = tm(i, j);
    }
    const auto s = Summarize(sized);
    std::uint64_t a1 = 0, a2 = 0;
    for (std::size_t c = 0; c < k; ++c) {
      ASSERT_EQ(static_cast<std::int64_t>(s.area_t2[c]) - static_cast<std::int64_t>(s.area_t1[c]),
                static_cast<std::int64_t>(s.gained[c]) - static_cast<std::int64_t>(s.lost[c]));
      ASSERT_EQ(s.changed[c], s.gained[c] + s.lost[c]);
      a1 += s.area_t1[c];
      a2 += s.area_t2[c];
    }
    ASSERT_EQ(a1, total);
    ASSERT_EQ(a2, total);
  }
}

TEST(ChangedMaskTest, TwoByTwoExample) {
  const auto p = TwoByTwo();
  EXPECT_EQ(Bits(ChangedMask(p, 1, ChangeRole::kTarget, 2)),
            (std::vector<std::uint8_t>{0, 1, 0, 0}));
  EXPECT_EQ(Bits(TransitionMask(p, 0, 1, 2)), (std::vector<std::uint8_t>{0, 1, 0, 0}));
  EXPECT_TRUE(TransitionMask(p, 1, 0, 2).IsEmpty());
}

TEST(ChangedMaskTest, IdenticalMasksAreEmpty) {
  SplitMix64 rng(5);
  auto p = RandomPair(rng, 6, 6, 4);
  p.t2 = p.t1;
  for (std::size_t k = 0; k < 4; ++k) {
    for (auto role : {ChangeRole::kSource, ChangeRole::kTarget, ChangeRole::kEither}) {
      EXPECT_TRUE(ChangedMask(p, k, role, 4).IsEmpty());
    }
  }
}

TEST(ChangedMaskTest, Errors) {
  const auto p = TwoByTwo();
  try {
    ChangedMask(p, 2, ChangeRole::kEither, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClassIdOutOfRange);
  }
  try {
    TransitionMask(p, 1, 1, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSameClass);
  }
}

TEST(ChangedMaskTest, ConsistencyWithMatrixOnRandomPairs) {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t k = 2 + rng.Below(9);
    const auto p = RandomPair(rng, 1 + rng.Below(64), 1 + rng.Below(64), k);
    const auto tm = ComputeTransitionMatrix(p, k);
    const auto s = Summarize(tm);
    for (std::size_t c = 0; c < k; ++c) {
      const auto src = Bits(ChangedMask(p, c, ChangeRole::kSource, k));
      const auto tgt = Bits(ChangedMask(p, c, ChangeRole::kTarget, k));
      const auto either = Bits(ChangedMask(p, c, ChangeRole::kEither, k));
      std::vector<std::uint8_t> union_of_rows(src.size(), 0);
      std::uint64_t n_src = 0, n_tgt = 0, n_either = 0;
      for (std::size_t q = 0; q < src.size(); ++q) {
        ASSERT_FALSE(src[q] && tgt[q]);
        ASSERT_EQ(either[q], src[q] | tgt[q]);
        n_src += src[q];
        n_tgt += tgt[q];
        n_either += either[q];
      }
      ASSERT_EQ(n_src, s.lost[c]);
      ASSERT_EQ(n_tgt, s.gained[c]);
      ASSERT_EQ(n_either, s.changed[c]);
      for (std::size_t j = 0; j < k; ++j) {
        if (j == c) continue;
        const auto t = TransitionMask(p, c, j, k);
        ASSERT_EQ(t.Popcount(), tm(c, j));
        const auto tb = Bits(t);
        for (std::size_t q = 0; q < tb.size(); ++q) union_of_rows[q] |= tb[q];
      }
      ASSERT_EQ(union_of_rows, src);
    }
  }
}

}  // namespace
}  // namespace cdqag
