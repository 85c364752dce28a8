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
#ifndef CDQAG_METRICS_HPP_
#define CDQAG_METRICS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cdqag/raster_io.hpp"
#include "cdqag/triplet_engine.hpp"
#include "json.hpp"

namespace cdqag {

inline constexpr double kDefaultThreshold = 0.35;

// Dense per-pixel scores (probabilities or logits), row-major. A zero width or
// height means the grid size is taken from the matching ground truth.
struct ScoreGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
};

struct Prediction {
  std::string triplet_id;
  std::string answer;
  std::variant<BinaryMask, ScoreGrid> mask;
};

// Pixel on iff probability >= threshold; logits go through the logistic first.
BinaryMask Binarize(const ScoreGrid& scores, double threshold = kDefaultThreshold,
                    bool scores_are_logits = false);

struct OverlapCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

OverlapCounts Overlap(const BinaryMask& pred, const BinaryMask& gt);
// |pred & gt| / |pred | gt|; two empty masks score 1.0.
double Iou(const BinaryMask& pred, const BinaryMask& gt);

struct EvalOptions {
  double threshold = kDefaultThreshold;
  bool scores_are_logits = false;
  // Score a missing prediction as a wrong answer with an empty mask instead of
  // failing with MissingPrediction.
  bool missing_as_wrong = false;
  std::size_t workers = 1;
};

struct TypeScores {
  std::uint64_t count = 0;
  std::uint64_t correct = 0;
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  double accuracy = 0.0;
  double miou = 0.0;
  double oiou = 0.0;
};

struct EvalReport {
  std::array<TypeScores, 8> per_type{};
  std::uint64_t count = 0;
  std::uint64_t correct = 0;
  double aa = 0.0;
  double oa = 0.0;
  double miou = 0.0;
  double oiou = 0.0;
};

EvalReport Evaluate(std::span<const Prediction> preds, std::span<const Triplet> gts,
                    const EvalOptions& options = {});

nlohmann::ordered_json ReportToJson(const EvalReport& report);
// Aligned table in the order CN..CR, AA, OA, mIoU, oIoU.
std::string ReportToTable(const EvalReport& report);

// {"id", "answer", "mask": {...}} or {"id", "answer", "scores_path"}; relative
// score paths are resolved against base_dir. Score files are flat
// little-endian float32 grids.
Prediction PredictionFromJson(const nlohmann::json& j,
                              const std::filesystem::path& base_dir);
std::vector<Prediction> LoadPredictions(const std::filesystem::path& path);
std::vector<double> ReadF32Grid(const std::filesystem::path& path);
void WriteF32Grid(const std::filesystem::path& path, std::span<const double> values);

}  // namespace cdqag

#endif  // CDQAG_METRICS_HPP_
