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
#include <algorithm>
#include <cmath>

#include "cdqag/error.hpp"
#include "cdqag/triplet_engine.hpp"

namespace cdqag {

std::string_view QuestionTypeName(QuestionType t) {
  switch (t) {
    case QuestionType::kCN: return "CN";
    case QuestionType::kCtW: return "CtW";
    case QuestionType::kCfW: return "CfW";
    case QuestionType::kIN: return "IN";
    case QuestionType::kDN: return "DN";
    case QuestionType::kLC: return "LC";
    case QuestionType::kSC: return "SC";
    case QuestionType::kCR: return "CR";
  }
  return "?";
}

std::optional<QuestionType> ParseQuestionType(std::string_view name) {
  for (auto t : kAllQuestionTypes) {
    if (QuestionTypeName(t) == name) return t;
  }
  return std::nullopt;
}

const std::array<std::string, kRatioBuckets>& RatioBucketTokens() {
  static const std::array<std::string, kRatioBuckets> tokens = [] {
    std::array<std::string, kRatioBuckets> t;
    t[0] = "0";
    for (std::size_t b = 1; b < kRatioBuckets; ++b) {
      t[b] = std::to_string(10 * (b - 1)) + "_to_" + std::to_string(10 * b);
    }
    return t;
  }();
  return tokens;
}

std::size_t RatioBucketIndex(std::uint64_t part, std::uint64_t whole) {
  if (part == 0) return 0;
  // ceil(10 * part / whole) in exact integer arithmetic; buckets are
  // upper-inclusive so exactly 10% lands in bucket 1.
  const std::uint64_t b = (10 * part + whole - 1) / whole;
  return static_cast<std::size_t>(std::min<std::uint64_t>(b, 10));
}

std::size_t RatioBucketIndexForPercent(double percent) {
  if (!(percent > 0.0)) return 0;
  const double b = std::ceil(percent / 10.0);
  return static_cast<std::size_t>(std::clamp(b, 1.0, 10.0));
}

AnswerVocabulary::AnswerVocabulary(const ClassTaxonomy& taxonomy) {
  tokens_ = {"yes", "no", "none"};
  for (const auto& n : taxonomy.names()) tokens_.push_back(n);
  for (const auto& b : RatioBucketTokens()) tokens_.push_back(b);
}

std::optional<std::size_t> AnswerVocabulary::IndexOf(std::string_view token) const {
  auto it = std::find(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - tokens_.begin());
}

AnswerEngine::AnswerEngine(const MaskPair& pair, const ClassTaxonomy& taxonomy,
                           ChangeMeasure measure)
    : pair_(pair),
      taxonomy_(taxonomy),
      measure_(measure),
      tm_(ComputeTransitionMatrix(pair, taxonomy.size())),
      summary_(Summarize(tm_)) {}

void AnswerEngine::CheckSubject(std::size_t k) const {
  if (k >= taxonomy_.size()) {
    throw Error(ErrorCode::kClassIdOutOfRange,
                "subject " + std::to_string(k) + " >= " + std::to_string(taxonomy_.size()));
  }
}

BinaryMask AnswerEngine::Empty() const {
  return EmptyMask(pair_.width(), pair_.height());
}

std::uint64_t AnswerEngine::RankingMeasure(std::size_t k) const {
  if (measure_ == ChangeMeasure::kGross) return summary_.changed[k];
  const auto a = summary_.area_t1[k];
  const auto b = summary_.area_t2[k];
  return a > b ? a - b : b - a;
}

Answer AnswerEngine::ChangeOrNot(std::size_t k) const {
  CheckSubject(k);
  if (summary_.changed[k] == 0) return {"no", Empty()};
  return {"yes", ChangedMask(pair_, k, ChangeRole::kEither, taxonomy_.size())};
}

Answer AnswerEngine::ChangeToWhat(std::size_t k) const {
  CheckSubject(k);
  if (summary_.lost[k] == 0) return {"none", Empty()};
  std::size_t best = taxonomy_.size();
  for (std::size_t j = 0; j < taxonomy_.size(); ++j) {
    if (j == k) continue;
    // Strict comparison keeps the smallest id on ties.
    if (best == taxonomy_.size() || tm_(k, j) > tm_(k, best)) best = j;
  }
  return {taxonomy_.name(best), TransitionMask(pair_, k, best, taxonomy_.size())};
}

Answer AnswerEngine::ChangeFromWhat(std::size_t k) const {
  CheckSubject(k);
  if (summary_.gained[k] == 0) return {"none", Empty()};
  std::size_t best = taxonomy_.size();
  for (std::size_t i = 0; i < taxonomy_.size(); ++i) {
    if (i == k) continue;
    if (best == taxonomy_.size() || tm_(i, k) > tm_(best, k)) best = i;
  }
  return {taxonomy_.name(best), TransitionMask(pair_, best, k, taxonomy_.size())};
}

Answer AnswerEngine::IncreaseOrNot(std::size_t k) const {
  CheckSubject(k);
  if (summary_.area_t2[k] > summary_.area_t1[k]) {
    return {"yes", ChangedMask(pair_, k, ChangeRole::kTarget, taxonomy_.size())};
  }
  return {"no", Empty()};
}

Answer AnswerEngine::DecreaseOrNot(std::size_t k) const {
  CheckSubject(k);
  if (summary_.area_t2[k] < summary_.area_t1[k]) {
    return {"yes", ChangedMask(pair_, k, ChangeRole::kSource, taxonomy_.size())};
  }
  return {"no", Empty()};
}

Answer AnswerEngine::LargestChange() const {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < taxonomy_.size(); ++k) {
    const auto m = RankingMeasure(k);
    if (m == 0) continue;
    if (!best || m > RankingMeasure(*best)) best = k;
  }
  if (!best) return {"none", Empty()};
  return {taxonomy_.name(*best),
          ChangedMask(pair_, *best, ChangeRole::kEither, taxonomy_.size())};
}

Answer AnswerEngine::SmallestChange() const {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < taxonomy_.size(); ++k) {
    const auto m = RankingMeasure(k);
    if (m == 0) continue;
    if (!best || m < RankingMeasure(*best)) best = k;
  }
  if (!best) return {"none", Empty()};
  return {taxonomy_.name(*best),
          ChangedMask(pair_, *best, ChangeRole::kEither, taxonomy_.size())};
}

Answer AnswerEngine::ChangeRatio(std::size_t k) const {
  CheckSubject(k);
  const std::size_t bucket = RatioBucketIndex(summary_.changed[k], tm_.total());
  if (bucket == 0) return {RatioBucketTokens()[0], Empty()};
  return {RatioBucketTokens()[bucket],
          ChangedMask(pair_, k, ChangeRole::kEither, taxonomy_.size())};
}

Answer AnswerEngine::Evaluate(QuestionType qtype,
                              std::optional<std::size_t> subject) const {
  if (!IsSceneLevel(qtype) && !subject) {
    throw Error(ErrorCode::kClassIdOutOfRange,
                std::string(QuestionTypeName(qtype)) + " needs a subject class");
  }
  switch (qtype) {
    case QuestionType::kCN: return ChangeOrNot(*subject);
    case QuestionType::kCtW: return ChangeToWhat(*subject);
    case QuestionType::kCfW: return ChangeFromWhat(*subject);
    case QuestionType::kIN: return IncreaseOrNot(*subject);
    case QuestionType::kDN: return DecreaseOrNot(*subject);
    case QuestionType::kLC: return LargestChange();
    case QuestionType::kSC: return SmallestChange();
    case QuestionType::kCR: return ChangeRatio(*subject);
  }
  return {"none", Empty()};
}

Answer AnswerCN(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax) {
  return AnswerEngine(pair, tax).ChangeOrNot(k);
}
Answer AnswerCtW(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax) {
  return AnswerEngine(pair, tax).ChangeToWhat(k);
}
Answer AnswerCfW(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax) {
  return AnswerEngine(pair, tax).ChangeFromWhat(k);
}
Answer AnswerIN(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax) {
  return AnswerEngine(pair, tax).IncreaseOrNot(k);
}
Answer AnswerDN(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax) {
  return AnswerEngine(pair, tax).DecreaseOrNot(k);
}
Answer AnswerLC(const MaskPair& pair, const ClassTaxonomy& tax, ChangeMeasure measure) {
  return AnswerEngine(pair, tax, measure).LargestChange();
}
Answer AnswerSC(const MaskPair& pair, const ClassTaxonomy& tax, ChangeMeasure measure) {
  return AnswerEngine(pair, tax, measure).SmallestChange();
}
Answer AnswerCR(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax) {
  return AnswerEngine(pair, tax).ChangeRatio(k);
}

}  // namespace cdqag
