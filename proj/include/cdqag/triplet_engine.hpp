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
#ifndef CDQAG_TRIPLET_ENGINE_HPP_
#define CDQAG_TRIPLET_ENGINE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdqag/change_analysis.hpp"
#include "cdqag/raster_io.hpp"
#include "json.hpp"

namespace cdqag {

// The eight change question families, in report order.
enum class QuestionType : std::uint8_t { kCN, kCtW, kCfW, kIN, kDN, kLC, kSC, kCR };

inline constexpr std::array<QuestionType, 8> kAllQuestionTypes = {
    QuestionType::kCN, QuestionType::kCtW, QuestionType::kCfW, QuestionType::kIN,
    QuestionType::kDN, QuestionType::kLC,  QuestionType::kSC,  QuestionType::kCR};

std::string_view QuestionTypeName(QuestionType t);
std::optional<QuestionType> ParseQuestionType(std::string_view name);
// LC and SC ask about the whole scene; every other type names a class.
constexpr bool IsSceneLevel(QuestionType t) {
  return t == QuestionType::kLC || t == QuestionType::kSC;
}

inline constexpr int kTemplatesPerType = 5;
inline constexpr int kUnrecordedTemplate = -1;

struct QuestionSpec {
  QuestionType qtype = QuestionType::kCN;
  int time_index = 1;                  // 1 = pre-change image, 2 = post-change
  std::optional<std::size_t> subject;  // class id; absent for LC/SC
  int template_id = 0;
};

// Answer tokens: yes/no/none, the class names, then 11 change-ratio buckets.
class AnswerVocabulary {
 public:
  explicit AnswerVocabulary(const ClassTaxonomy& taxonomy);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::optional<std::size_t> IndexOf(std::string_view token) const;
  bool Contains(std::string_view token) const { return IndexOf(token).has_value(); }

 private:
  std::vector<std::string> tokens_;
};

inline constexpr std::size_t kRatioBuckets = 11;
// "0", "0_to_10", ..., "90_to_100".
const std::array<std::string, kRatioBuckets>& RatioBucketTokens();
// Bucket index for part/whole: 0 iff part == 0, else ceil(10 * part / whole).
std::size_t RatioBucketIndex(std::uint64_t part, std::uint64_t whole);
// Same rule for a percentage r in [0, 100].
std::size_t RatioBucketIndexForPercent(double percent);

enum class ChangeMeasure { kGross, kNet };

struct Answer {
  std::string token;
  BinaryMask mask;
};

// Evaluates the eight answer rules for one pair. The transition matrix and
// class summary are computed once at construction.
class AnswerEngine {
 public:
  AnswerEngine(const MaskPair& pair, const ClassTaxonomy& taxonomy,
               ChangeMeasure measure = ChangeMeasure::kGross);

  const TransitionMatrix& matrix() const { return tm_; }
  const ClassChangeSummary& summary() const { return summary_; }

  Answer ChangeOrNot(std::size_t k) const;
  Answer ChangeToWhat(std::size_t k) const;
  Answer ChangeFromWhat(std::size_t k) const;
  Answer IncreaseOrNot(std::size_t k) const;
  Answer DecreaseOrNot(std::size_t k) const;
  Answer LargestChange() const;
  Answer SmallestChange() const;
  Answer ChangeRatio(std::size_t k) const;

  Answer Evaluate(QuestionType qtype, std::optional<std::size_t> subject) const;

 private:
  void CheckSubject(std::size_t k) const;
  std::uint64_t RankingMeasure(std::size_t k) const;
  BinaryMask Empty() const;

  const MaskPair& pair_;
  const ClassTaxonomy& taxonomy_;
  ChangeMeasure measure_;
  TransitionMatrix tm_;
  ClassChangeSummary summary_;
};

// Free-function forms of the rules.
Answer AnswerCN(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax);
Answer AnswerCtW(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax);
Answer AnswerCfW(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax);
Answer AnswerIN(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax);
Answer AnswerDN(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax);
Answer AnswerLC(const MaskPair& pair, const ClassTaxonomy& tax,
                ChangeMeasure measure = ChangeMeasure::kGross);
Answer AnswerSC(const MaskPair& pair, const ClassTaxonomy& tax,
                ChangeMeasure measure = ChangeMeasure::kGross);
Answer AnswerCR(const MaskPair& pair, std::size_t k, const ClassTaxonomy& tax);

// ---------------------------------------------------------------------------
// Question templates

// Which pair of temporal words a template uses for time_index 1 / 2.
enum class TimeWords { kOrdinal, kPhase, kRelative };

struct QuestionTemplate {
  std::string text;  // may contain {class} and {time}
  TimeWords time_words = TimeWords::kOrdinal;
};

class TemplateBank {
 public:
  TemplateBank() = default;
  explicit TemplateBank(std::map<QuestionType, std::vector<QuestionTemplate>> templates);

  const QuestionTemplate& Get(QuestionType qtype, int template_id) const;
  // Throws InvalidTemplates if any template renders outside 4..15 words
  // for any class of the taxonomy or lacks a required placeholder.
  void Validate(const ClassTaxonomy& taxonomy) const;

 private:
  std::map<QuestionType, std::vector<QuestionTemplate>> templates_;
};

TemplateBank DefaultTemplateBank();
// {"CN": [{"text": "...", "time_words": "ordinal|phase|relative"}, x5], ...}
TemplateBank TemplateBankFromJson(const nlohmann::json& j);

std::string_view TimeWord(TimeWords words, int time_index);
std::string RenderQuestion(const QuestionSpec& spec, const ClassTaxonomy& taxonomy,
                           const TemplateBank& bank);
std::size_t WordCount(std::string_view text);

// ---------------------------------------------------------------------------
// Triplets

struct Triplet {
  std::string triplet_id;
  std::string pair_id;
  std::string question;
  QuestionSpec spec;
  std::optional<std::string> subject_name;
  std::string answer;
  BinaryMask mask;
};

struct GenerationConfig {
  std::vector<QuestionType> qtypes{kAllQuestionTypes.begin(), kAllQuestionTypes.end()};
  std::vector<int> time_indices{1, 2};
  bool include_absent = false;
  ChangeMeasure change_measure = ChangeMeasure::kGross;
};

std::vector<Triplet> GenerateTriplets(const MaskPair& pair,
                                      const ClassTaxonomy& taxonomy,
                                      const GenerationConfig& config,
                                      std::uint64_t seed,
                                      const TemplateBank& bank = DefaultTemplateBank());

// Generates every pair with `workers` threads; output is ordered by pair id
// and identical for any worker count.
std::vector<Triplet> GenerateDataset(std::span<const MaskPair> pairs,
                                     const ClassTaxonomy& taxonomy,
                                     const GenerationConfig& config,
                                     std::uint64_t seed, std::size_t workers,
                                     const TemplateBank& bank = DefaultTemplateBank());

nlohmann::ordered_json TripletToJson(const Triplet& t);
// Subject ids are resolved only when a taxonomy is given. The template id is
// not part of the line format and comes back as kUnrecordedTemplate.
Triplet TripletFromJson(const nlohmann::json& j,
                        const ClassTaxonomy* taxonomy = nullptr);
std::string TripletsToJsonl(std::span<const Triplet> triplets);
std::vector<Triplet> ParseJsonl(std::string_view text,
                                const ClassTaxonomy* taxonomy = nullptr);

struct DatasetSplit {
  std::vector<std::string> train_pairs, val_pairs, test_pairs;
  std::vector<Triplet> train, val, test;
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

// Image-wise split: pairs are shuffled with the seed and cut by the ratios.
DatasetSplit SplitDataset(std::span<const Triplet> triplets, SplitRatios ratios,
                          std::uint64_t seed);
nlohmann::ordered_json SplitManifest(const DatasetSplit& split);

struct StatsReport {
  std::uint64_t num_triplets = 0;
  std::uint64_t num_pairs = 0;
  std::map<std::string, std::uint64_t> answer_frequency;
  std::array<std::uint64_t, 8> type_counts{};
  std::array<std::uint64_t, kRatioBuckets> area_ratio_histogram{};
  double mean_words = 0.0;
  std::size_t min_words = 0;
  std::size_t max_words = 0;
};

StatsReport DatasetStats(std::span<const Triplet> triplets);
nlohmann::ordered_json StatsToJson(const StatsReport& report);

}  // namespace cdqag

#endif  // CDQAG_TRIPLET_ENGINE_HPP_
