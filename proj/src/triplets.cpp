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
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "cdqag/error.hpp"
#include "cdqag/rng.hpp"
#include "cdqag/triplet_engine.hpp"

namespace cdqag {
namespace {

std::vector<std::size_t> Subjects(const MaskPair& pair, std::size_t num_classes,
                                  bool include_absent) {
  std::vector<bool> present(num_classes, include_absent);
  for (auto c : pair.t1.labels) present[c] = true;
  for (auto c : pair.t2.labels) present[c] = true;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (present[k]) out.push_back(k);
  }
  return out;
}

std::string TripletId(const std::string& pair_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return pair_id + "_q" + buf;
}

}  // namespace

std::vector<Triplet> GenerateTriplets(const MaskPair& pair,
                                      const ClassTaxonomy& taxonomy,
                                      const GenerationConfig& config,
                                      std::uint64_t seed, const TemplateBank& bank) {
  ValidatePair(pair, taxonomy.size());
  for (int t : config.time_indices) {
    if (t != 1 && t != 2) {
      throw Error(ErrorCode::kTemplateOutOfRange, "time index must be 1 or 2");
    }
  }
  AnswerEngine engine(pair, taxonomy, config.change_measure);
  SplitMix64 rng(DeriveSeed(seed, pair.pair_id));
  const auto subjects = Subjects(pair, taxonomy.size(), config.include_absent);

  // Canonical order: qtype, subject, time index.
  std::vector<QuestionType> qtypes = config.qtypes;
  std::sort(qtypes.begin(), qtypes.end());
  qtypes.erase(std::unique(qtypes.begin(), qtypes.end()), qtypes.end());
  std::vector<int> times = config.time_indices;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<Triplet> out;
  auto emit = [&](QuestionType qtype, std::optional<std::size_t> subject) {
    Answer answer = engine.Evaluate(qtype, subject);
    for (int time : times) {
      Triplet t;
      t.pair_id = pair.pair_id;
      t.triplet_id = TripletId(pair.pair_id, out.size());
      t.spec = QuestionSpec{qtype, time, subject,
                            static_cast<int>(rng.Below(kTemplatesPerType))};
      t.question = RenderQuestion(t.spec, taxonomy, bank);
      if (subject) t.subject_name = taxonomy.name(*subject);
      t.answer = answer.token;
      t.mask = answer.mask;
      out.push_back(std::move(t));
    }
  };
  for (QuestionType qtype : qtypes) {
    if (IsSceneLevel(qtype)) {
      emit(qtype, std::nullopt);
    } else {
      for (std::size_t k : subjects) emit(qtype, k);
    }
  }
  return out;
}

std::vector<Triplet> GenerateDataset(std::span<const MaskPair> pairs,
                                     const ClassTaxonomy& taxonomy,
                                     const GenerationConfig& config,
                                     std::uint64_t seed, std::size_t workers,
                                     const TemplateBank& bank) {
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pairs[a].pair_id < pairs[b].pair_id;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (pairs[order[i]].pair_id == pairs[order[i - 1]].pair_id) {
      throw Error(ErrorCode::kMalformedFile,
                  "duplicate pair id '" + pairs[order[i]].pair_id + "'");
    }
  }

  std::vector<std::vector<Triplet>> per_pair(pairs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < order.size(); i = next++) {
      try {
        per_pair[i] = GenerateTriplets(pairs[order[i]], taxonomy, config, seed, bank);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, pairs.size()));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<Triplet> out;
  for (auto& v : per_pair) {
    std::move(v.begin(), v.end(), std::back_inserter(out));
  }
  return out;
}

nlohmann::ordered_json TripletToJson(const Triplet& t) {
  nlohmann::ordered_json j;
  j["id"] = t.triplet_id;
  j["pair_id"] = t.pair_id;
  j["qtype"] = QuestionTypeName(t.spec.qtype);
  j["time_index"] = t.spec.time_index;
  if (t.subject_name) {
    j["subject"] = *t.subject_name;
  } else {
    j["subject"] = nullptr;
  }
  j["question"] = t.question;
  j["answer"] = t.answer;
  j["mask"] = MaskToJson(t.mask);
  return j;
}

Triplet TripletFromJson(const nlohmann::json& j, const ClassTaxonomy* taxonomy) {
  Triplet t;
  try {
    t.triplet_id = j.at("id").get<std::string>();
    t.pair_id = j.at("pair_id").get<std::string>();
    const auto qname = j.at("qtype").get<std::string>();
    auto qtype = ParseQuestionType(qname);
    if (!qtype) throw Error(ErrorCode::kMalformedFile, "unknown qtype " + qname);
    t.spec.qtype = *qtype;
    t.spec.time_index = j.at("time_index").get<int>();
    t.spec.template_id = kUnrecordedTemplate;
    const auto& subject = j.at("subject");
    if (!subject.is_null()) {
      t.subject_name = subject.get<std::string>();
      if (taxonomy) {
        const auto id = taxonomy->IdOf(*t.subject_name);
        if (id >= taxonomy->size()) {
          throw Error(ErrorCode::kClassIdOutOfRange,
                      "unknown subject " + *t.subject_name);
        }
        t.spec.subject = id;
      }
    }
    t.question = j.at("question").get<std::string>();
    t.answer = j.at("answer").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("triplet: ") + e.what());
  }
  t.mask = MaskFromJson(j.at("mask"));
  return t;
}

std::string TripletsToJsonl(std::span<const Triplet> triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += TripletToJson(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<Triplet> ParseJsonl(std::string_view text, const ClassTaxonomy* taxonomy) {
  std::vector<Triplet> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedFile,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(TripletFromJson(j, taxonomy));
  }
  return out;
}

DatasetSplit SplitDataset(std::span<const Triplet> triplets, SplitRatios ratios,
                          std::uint64_t seed) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kBadRatios, "ratios must be non-negative and sum to 1");
  }
  std::set<std::string> unique;
  for (const auto& t : triplets) unique.insert(t.pair_id);
  std::vector<std::string> ids(unique.begin(), unique.end());

  SplitMix64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.Below(i)]);
  }

  const auto n = static_cast<double>(ids.size());
  auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
  auto n_val = static_cast<std::size_t>(std::llround(ratios.val * n));
  n_train = std::min(n_train, ids.size());
  n_val = std::min(n_val, ids.size() - n_train);

  DatasetSplit split;
  split.train_pairs.assign(ids.begin(), ids.begin() + n_train);
  split.val_pairs.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test_pairs.assign(ids.begin() + n_train + n_val, ids.end());

  std::set<std::string> train(split.train_pairs.begin(), split.train_pairs.end());
  std::set<std::string> val(split.val_pairs.begin(), split.val_pairs.end());
  for (const auto& t : triplets) {
    if (train.count(t.pair_id)) {
      split.train.push_back(t);
    } else if (val.count(t.pair_id)) {
      split.val.push_back(t);
    } else {
      split.test.push_back(t);
    }
  }
  return split;
}

nlohmann::ordered_json SplitManifest(const DatasetSplit& split) {
  nlohmann::ordered_json j;
  j["train"] = split.train_pairs;
  j["val"] = split.val_pairs;
  j["test"] = split.test_pairs;
  return j;
}

StatsReport DatasetStats(std::span<const Triplet> triplets) {
  if (triplets.empty()) throw Error(ErrorCode::kEmptyDataset, "no triplets");
  StatsReport r;
  r.num_triplets = triplets.size();
  std::set<std::string> pairs;
  std::uint64_t words_total = 0;
  r.min_words = static_cast<std::size_t>(-1);
  for (const auto& t : triplets) {
    pairs.insert(t.pair_id);
    ++r.answer_frequency[t.answer];
    ++r.type_counts[static_cast<std::size_t>(t.spec.qtype)];
    ++r.area_ratio_histogram[RatioBucketIndex(t.mask.Popcount(), t.mask.pixels())];
    const auto words = WordCount(t.question);
    words_total += words;
    r.min_words = std::min(r.min_words, words);
    r.max_words = std::max(r.max_words, words);
  }
  r.num_pairs = pairs.size();
  r.mean_words = static_cast<double>(words_total) / static_cast<double>(r.num_triplets);
  return r;
}

nlohmann::ordered_json StatsToJson(const StatsReport& report) {
  nlohmann::ordered_json j;
  j["num_triplets"] = report.num_triplets;
  j["num_pairs"] = report.num_pairs;
  nlohmann::ordered_json answers = nlohmann::ordered_json::object();
  for (const auto& [token, count] : report.answer_frequency) answers[token] = count;
  j["answer_frequency"] = answers;
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (auto t : kAllQuestionTypes) {
    types[std::string(QuestionTypeName(t))] =
        report.type_counts[static_cast<std::size_t>(t)];
  }
  j["type_counts"] = types;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (std::size_t b = 0; b < kRatioBuckets; ++b) {
    hist[RatioBucketTokens()[b]] = report.area_ratio_histogram[b];
  }
  j["mask_area_ratio_histogram"] = hist;
  j["question_words"] = {{"mean", report.mean_words},
                         {"min", report.min_words},
                         {"max", report.max_words}};
  return j;
}

}  // namespace cdqag
