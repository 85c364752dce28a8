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
#include "cdqag/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cdqag/error.hpp"

namespace cdqag {
namespace {

std::string NormalizeAnswer(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct SampleResult {
  bool correct = false;
  OverlapCounts overlap;
  double iou = 0.0;
};

double Ratio(std::uint64_t num, std::uint64_t den, double if_empty) {
  return den == 0 ? if_empty : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

BinaryMask Binarize(const ScoreGrid& scores, double threshold, bool scores_are_logits) {
  if (scores.values.size() != scores.width * scores.height) {
    throw Error(ErrorCode::kDimensionMismatch, "score grid size != width*height");
  }
  std::vector<std::uint8_t> bits(scores.values.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const double v = scores.values[i];
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "score at pixel " + std::to_string(i));
    }
    const double p = scores_are_logits ? 1.0 / (1.0 + std::exp(-v)) : v;
    bits[i] = p >= threshold ? 1 : 0;
  }
  return RleEncode(bits, scores.width, scores.height);
}

OverlapCounts Overlap(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction and ground truth differ in size");
  }
  const auto a = RleDecode(pred);
  const auto b = RleDecode(gt);
  OverlapCounts c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.intersection += (a[i] & b[i]);
    c.union_ += (a[i] | b[i]);
  }
  return c;
}

double Iou(const BinaryMask& pred, const BinaryMask& gt) {
  const auto c = Overlap(pred, gt);
  return Ratio(c.intersection, c.union_, 1.0);
}

EvalReport Evaluate(std::span<const Prediction> preds, std::span<const Triplet> gts,
                    const EvalOptions& options) {
  std::unordered_map<std::string, std::size_t> gt_index;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (!gt_index.emplace(gts[i].triplet_id, i).second) {
      throw Error(ErrorCode::kDuplicatePrediction,
                  "duplicate ground-truth id " + gts[i].triplet_id);
    }
  }
  std::vector<const Prediction*> matched(gts.size(), nullptr);
  for (const auto& p : preds) {
    auto it = gt_index.find(p.triplet_id);
    if (it == gt_index.end()) {
      throw Error(ErrorCode::kUnknownTripletId, "prediction for unknown id " + p.triplet_id);
    }
    if (matched[it->second]) {
      throw Error(ErrorCode::kDuplicatePrediction, "two predictions for " + p.triplet_id);
    }
    matched[it->second] = &p;
  }
  if (!options.missing_as_wrong) {
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (!matched[i]) {
        throw Error(ErrorCode::kMissingPrediction, "no prediction for " + gts[i].triplet_id);
      }
    }
  }

  auto score_one = [&](std::size_t i) {
    const Triplet& gt = gts[i];
    SampleResult r;
    BinaryMask pred_mask;
    if (const Prediction* p = matched[i]) {
      r.correct = NormalizeAnswer(p->answer) == NormalizeAnswer(gt.answer);
      if (const auto* m = std::get_if<BinaryMask>(&p->mask)) {
        pred_mask = *m;
      } else {
        ScoreGrid grid = std::get<ScoreGrid>(p->mask);
        if (grid.width == 0 || grid.height == 0) {
          grid.width = gt.mask.width;
          grid.height = gt.mask.height;
        }
        pred_mask = Binarize(grid, options.threshold, options.scores_are_logits);
      }
    } else {
      pred_mask = EmptyMask(gt.mask.width, gt.mask.height);
    }
    r.overlap = Overlap(pred_mask, gt.mask);
    r.iou = Ratio(r.overlap.intersection, r.overlap.union_, 1.0);
    return r;
  };

  // Per-sample results are stored by ground-truth position and reduced
  // sequentially afterwards, so the shard count cannot change any bit.
  std::vector<SampleResult> results(gts.size());
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(options.workers, gts.size()));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < gts.size(); ++i) results[i] = score_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < gts.size(); i = next++) {
          try {
            results[i] = score_one(i);
          } catch (...) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
              failure = std::current_exception();
            }
          }
        }
      });
    }
    for (auto& th : threads) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  EvalReport report;
  std::array<double, 8> iou_sum{};
  OverlapCounts total_overlap;
  double total_iou = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    auto& ts = report.per_type[static_cast<std::size_t>(gts[i].spec.qtype)];
    const auto& r = results[i];
    ++ts.count;
    ts.correct += r.correct ? 1 : 0;
    ts.intersection += r.overlap.intersection;
    ts.union_ += r.overlap.union_;
    iou_sum[static_cast<std::size_t>(gts[i].spec.qtype)] += r.iou;
    total_overlap.intersection += r.overlap.intersection;
    total_overlap.union_ += r.overlap.union_;
    total_iou += r.iou;
    ++report.count;
    report.correct += r.correct ? 1 : 0;
  }

  double acc_sum = 0.0;
  std::size_t types_present = 0;
  for (std::size_t t = 0; t < report.per_type.size(); ++t) {
    auto& ts = report.per_type[t];
    if (ts.count == 0) continue;
    ts.accuracy = Ratio(ts.correct, ts.count, 0.0);
    ts.miou = iou_sum[t] / static_cast<double>(ts.count);
    ts.oiou = Ratio(ts.intersection, ts.union_, 1.0);
    acc_sum += ts.accuracy;
    ++types_present;
  }
  report.aa = types_present ? acc_sum / static_cast<double>(types_present) : 0.0;
  report.oa = Ratio(report.correct, report.count, 0.0);
  report.miou = report.count ? total_iou / static_cast<double>(report.count) : 0.0;
  report.oiou = Ratio(total_overlap.intersection, total_overlap.union_, 1.0);
  return report;
}

nlohmann::ordered_json ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (auto t : kAllQuestionTypes) {
    const auto& ts = report.per_type[static_cast<std::size_t>(t)];
    nlohmann::ordered_json e;
    e["count"] = ts.count;
    e["correct"] = ts.correct;
    e["accuracy"] = ts.accuracy;
    e["miou"] = ts.miou;
    e["oiou"] = ts.oiou;
    e["intersection"] = ts.intersection;
    e["union"] = ts.union_;
    types[std::string(QuestionTypeName(t))] = e;
  }
  j["per_type"] = types;
  j["count"] = report.count;
  j["correct"] = report.correct;
  j["AA"] = report.aa;
  j["OA"] = report.oa;
  j["mIoU"] = report.miou;
  j["oIoU"] = report.oiou;
  return j;
}

std::string ReportToTable(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-6s %8s %10s %10s %10s\n", "type", "count",
                "accuracy", "mIoU", "oIoU");
  out << line;
  for (auto t : kAllQuestionTypes) {
    const auto& ts = report.per_type[static_cast<std::size_t>(t)];
    if (ts.count == 0) {
      std::snprintf(line, sizeof(line), "%-6s %8d %10s %10s %10s\n",
                    std::string(QuestionTypeName(t)).c_str(), 0, "-", "-", "-");
    } else {
      std::snprintf(line, sizeof(line), "%-6s %8llu %10.2f %10.2f %10.2f\n",
                    std::string(QuestionTypeName(t)).c_str(),
                    static_cast<unsigned long long>(ts.count), 100.0 * ts.accuracy,
                    100.0 * ts.miou, 100.0 * ts.oiou);
    }
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-6s %8s %10.2f\n", "AA", "", 100.0 * report.aa);
  out << line;
  std::snprintf(line, sizeof(line), "%-6s %8llu %10.2f\n", "OA",
                static_cast<unsigned long long>(report.count), 100.0 * report.oa);
  out << line;
  std::snprintf(line, sizeof(line), "%-6s %8s %10s %10.2f\n", "mIoU", "", "",
                100.0 * report.miou);
  out << line;
  std::snprintf(line, sizeof(line), "%-6s %8s %10s %10s %10.2f\n", "oIoU", "", "", "",
                100.0 * report.oiou);
  out << line;
  return out.str();
}

std::vector<double> ReadF32Grid(const std::filesystem::path& path) {
  const std::string bytes = ReadFile(path);
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": size is not a multiple of 4");
  }
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) {
      bits = (bits << 8) | static_cast<unsigned char>(bytes[4 * i + static_cast<std::size_t>(b)]);
    }
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

void WriteF32Grid(const std::filesystem::path& path, std::span<const double> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) {
      bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Prediction PredictionFromJson(const nlohmann::json& j,
                              const std::filesystem::path& base_dir) {
  Prediction p;
  try {
    p.triplet_id = j.at("id").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    if (j.contains("mask")) {
      p.mask = MaskFromJson(j.at("mask"));
    } else if (j.contains("scores_path")) {
      std::filesystem::path sp = j.at("scores_path").get<std::string>();
      if (sp.is_relative()) sp = base_dir / sp;
      ScoreGrid grid;
      grid.values = ReadF32Grid(sp);
      p.mask = std::move(grid);
    } else {
      throw Error(ErrorCode::kMalformedFile,
                  "prediction " + p.triplet_id + " has neither mask nor scores_path");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("prediction: ") + e.what());
  }
  return p;
}

std::vector<Prediction> LoadPredictions(const std::filesystem::path& path) {
  const std::string text = ReadFile(path);
  std::vector<Prediction> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedFile,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(PredictionFromJson(j, path.parent_path()));
  }
  return out;
}

}  // namespace cdqag
