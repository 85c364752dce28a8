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
#include <cctype>

#include "cdqag/error.hpp"
#include "cdqag/triplet_engine.hpp"

namespace cdqag {
namespace {

constexpr std::string_view kClassSlot = "{class}";
constexpr std::string_view kTimeSlot = "{time}";

using TW = TimeWords;

std::map<QuestionType, std::vector<QuestionTemplate>> BuiltinTemplates() {
  return {
      {QuestionType::kCN,
       {{"Has the {class} area changed in the {time} image?", TW::kOrdinal},
        {"Is there any change in {class} in the {time} image?", TW::kPhase},
        {"Comparing with the {time} image, did the {class} change?", TW::kRelative},
        {"Looking at the {time} image, has any {class} changed?", TW::kOrdinal},
        {"Does the {time} image show a change in {class}?", TW::kPhase}}},
      {QuestionType::kCtW,
       {{"What has the {class} changed into in the {time} image?", TW::kPhase},
        {"In the {time} image, what did the {class} turn into?", TW::kOrdinal},
        {"What did the {class} area become in the {time} image?", TW::kRelative},
        {"Which class replaced the {class} in the {time} image?", TW::kPhase},
        {"What land cover did the {class} change to in the {time} image?",
         TW::kOrdinal}}},
      {QuestionType::kCfW,
       {{"What has changed into {class} in the {time} image?", TW::kPhase},
        {"In the {time} image, what did the new {class} come from?", TW::kOrdinal},
        {"Which class was converted to {class} in the {time} image?", TW::kRelative},
        {"What land cover turned into {class} in the {time} image?", TW::kPhase},
        {"From what class did the {class} change in the {time} image?",
         TW::kOrdinal}}},
      {QuestionType::kIN,
       {{"Has the {class} area increased in the {time} image?", TW::kOrdinal},
        {"Did the amount of {class} grow in the {time} image?", TW::kPhase},
        {"Is there more {class} in the {time} image?", TW::kRelative},
        {"Does the {time} image show an increase in {class}?", TW::kOrdinal},
        {"Has {class} coverage expanded in the {time} image?", TW::kPhase}}},
      {QuestionType::kDN,
       {{"Has the {class} area decreased in the {time} image?", TW::kOrdinal},
        {"Did the amount of {class} shrink in the {time} image?", TW::kPhase},
        {"Is there less {class} in the {time} image?", TW::kRelative},
        {"Does the {time} image show a decrease in {class}?", TW::kOrdinal},
        {"Has {class} coverage been reduced in the {time} image?", TW::kPhase}}},
      {QuestionType::kLC,
       {{"What is the largest change in the {time} image?", TW::kOrdinal},
        {"Which class changed the most in the {time} image?", TW::kPhase},
        {"What land cover shows the largest change in the {time} image?",
         TW::kRelative},
        {"In the {time} image, which category changed the most?", TW::kOrdinal},
        {"Which land cover category has the biggest change in the {time} image?",
         TW::kPhase}}},
      {QuestionType::kSC,
       {{"What is the smallest change in the {time} image?", TW::kOrdinal},
        {"Which class changed the least in the {time} image?", TW::kPhase},
        {"What land cover shows the smallest change in the {time} image?",
         TW::kRelative},
        {"In the {time} image, which category changed the least?", TW::kOrdinal},
        {"Which land cover category has the slightest change in the {time} image?",
         TW::kPhase}}},
      {QuestionType::kCR,
       {{"How much {class} area has changed in the {time} image?", TW::kPhase},
        {"What proportion of the {class} area changed in the {time} image?",
         TW::kOrdinal},
        {"What is the change ratio of {class} in the {time} image?", TW::kRelative},
        {"What share of the scene is changed {class} in the {time} image?",
         TW::kPhase},
        {"How large is the changed {class} area in the {time} image?",
         TW::kOrdinal}}},
  };
}

void ReplaceAll(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string DisplayName(const std::string& class_name) {
  std::string out = class_name;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::optional<TimeWords> ParseTimeWords(std::string_view s) {
  if (s == "ordinal") return TimeWords::kOrdinal;
  if (s == "phase") return TimeWords::kPhase;
  if (s == "relative") return TimeWords::kRelative;
  return std::nullopt;
}

}  // namespace

std::string_view TimeWord(TimeWords words, int time_index) {
  const bool first = time_index == 1;
  switch (words) {
    case TimeWords::kOrdinal: return first ? "first" : "second";
    case TimeWords::kPhase: return first ? "pre-change" : "post-change";
    case TimeWords::kRelative: return first ? "before" : "after";
  }
  return "";
}

std::size_t WordCount(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

TemplateBank::TemplateBank(std::map<QuestionType, std::vector<QuestionTemplate>> templates)
    : templates_(std::move(templates)) {
  for (auto t : kAllQuestionTypes) {
    auto it = templates_.find(t);
    if (it == templates_.end() || it->second.size() != kTemplatesPerType) {
      throw Error(ErrorCode::kInvalidTemplates,
                  std::string(QuestionTypeName(t)) + " needs exactly " +
                      std::to_string(kTemplatesPerType) + " templates");
    }
    for (const auto& tpl : it->second) {
      const bool has_class = tpl.text.find(kClassSlot) != std::string::npos;
      if (has_class == IsSceneLevel(t)) {
        throw Error(ErrorCode::kInvalidTemplates,
                    std::string(QuestionTypeName(t)) + " template '" + tpl.text +
                        (IsSceneLevel(t) ? "' must not name a class"
                                         : "' must contain {class}"));
      }
      if (tpl.text.find(kTimeSlot) == std::string::npos) {
        throw Error(ErrorCode::kInvalidTemplates,
                    "template '" + tpl.text + "' must contain {time}");
      }
    }
  }
}

const QuestionTemplate& TemplateBank::Get(QuestionType qtype, int template_id) const {
  if (template_id < 0 || template_id >= kTemplatesPerType) {
    throw Error(ErrorCode::kTemplateOutOfRange,
                "template id " + std::to_string(template_id) + " not in [0, 5)");
  }
  auto it = templates_.find(qtype);
  if (it == templates_.end()) {
    throw Error(ErrorCode::kTemplateOutOfRange, "template bank is empty");
  }
  return it->second[static_cast<std::size_t>(template_id)];
}

void TemplateBank::Validate(const ClassTaxonomy& taxonomy) const {
  for (auto t : kAllQuestionTypes) {
    for (int id = 0; id < kTemplatesPerType; ++id) {
      for (int time : {1, 2}) {
        const std::size_t subjects = IsSceneLevel(t) ? 1 : taxonomy.size();
        for (std::size_t k = 0; k < subjects; ++k) {
          QuestionSpec spec{t, time, std::nullopt, id};
          if (!IsSceneLevel(t)) spec.subject = k;
          const auto words = WordCount(RenderQuestion(spec, taxonomy, *this));
          if (words < 4 || words > 15) {
            throw Error(ErrorCode::kInvalidTemplates,
                        std::string(QuestionTypeName(t)) + " template " +
                            std::to_string(id) + " renders to " +
                            std::to_string(words) + " words");
          }
        }
      }
    }
  }
}

TemplateBank DefaultTemplateBank() { return TemplateBank(BuiltinTemplates()); }

TemplateBank TemplateBankFromJson(const nlohmann::json& j) {
  std::map<QuestionType, std::vector<QuestionTemplate>> out;
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidTemplates, "templates must be a JSON object");
  }
  for (const auto& [key, list] : j.items()) {
    auto qtype = ParseQuestionType(key);
    if (!qtype) throw Error(ErrorCode::kInvalidTemplates, "unknown type " + key);
    if (!list.is_array()) {
      throw Error(ErrorCode::kInvalidTemplates, key + " must map to an array");
    }
    for (const auto& item : list) {
      QuestionTemplate tpl;
      try {
        tpl.text = item.at("text").get<std::string>();
        auto words = ParseTimeWords(item.value("time_words", "ordinal"));
        if (!words) throw Error(ErrorCode::kInvalidTemplates, "bad time_words");
        tpl.time_words = *words;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidTemplates, e.what());
      }
      out[*qtype].push_back(std::move(tpl));
    }
  }
  return TemplateBank(std::move(out));
}

std::string RenderQuestion(const QuestionSpec& spec, const ClassTaxonomy& taxonomy,
                           const TemplateBank& bank) {
  if (spec.time_index != 1 && spec.time_index != 2) {
    throw Error(ErrorCode::kTemplateOutOfRange, "time_index must be 1 or 2");
  }
  const QuestionTemplate& tpl = bank.Get(spec.qtype, spec.template_id);
  std::string text = tpl.text;
  if (!IsSceneLevel(spec.qtype)) {
    if (!spec.subject || *spec.subject >= taxonomy.size()) {
      throw Error(ErrorCode::kClassIdOutOfRange,
                  std::string(QuestionTypeName(spec.qtype)) + " needs a valid subject");
    }
    ReplaceAll(text, kClassSlot, DisplayName(taxonomy.name(*spec.subject)));
  }
  ReplaceAll(text, kTimeSlot, TimeWord(tpl.time_words, spec.time_index));
  return text;
}

}  // namespace cdqag
