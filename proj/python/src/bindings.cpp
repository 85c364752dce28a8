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
// Python extension. Structured results cross the boundary as JSON text and are
// decoded by the package wrapper.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdqag/error.hpp"
#include "cdqag/losses.hpp"
#include "cdqag/metrics.hpp"
#include "cdqag/raster_io.hpp"
#include "cdqag/triplet_engine.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

cdqag::ClassTaxonomy TaxonomyIn(const fs::path& dir, const std::optional<std::string>& path) {
  if (path) return cdqag::LoadTaxonomy(*path);
  if (fs::exists(dir / "taxonomy.json")) return cdqag::LoadTaxonomy(dir / "taxonomy.json");
  return cdqag::DefaultTaxonomy();
}

cdqag::MaskPair PairFromLists(const std::vector<int>& t1, const std::vector<int>& t2,
                              std::size_t width, std::size_t height, std::size_t classes) {
  cdqag::MaskPair p;
  p.pair_id = "py";
  p.t1 = {width, height, std::vector<cdqag::ClassId>(t1.begin(), t1.end())};
  p.t2 = {width, height, std::vector<cdqag::ClassId>(t2.begin(), t2.end())};
  for (int v : t1) {
    if (v < 0 || v > 255) throw cdqag::Error(cdqag::ErrorCode::kClassIdOutOfRange, "label");
  }
  for (int v : t2) {
    if (v < 0 || v > 255) throw cdqag::Error(cdqag::ErrorCode::kClassIdOutOfRange, "label");
  }
  cdqag::ValidatePair(p, classes);
  return p;
}

}  // namespace

PYBIND11_MODULE(_cdqag, m) {
  m.doc() = "Change question answering and grounding toolkit";

  static py::exception<cdqag::Error> error(m, "CdqagError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const cdqag::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("DEFAULT_THRESHOLD") = cdqag::kDefaultThreshold;

  m.def("default_taxonomy", [] { return cdqag::DefaultTaxonomy().names(); });

  m.def(
      "rle_encode",
      [](const std::vector<std::uint8_t>& bits, std::size_t width, std::size_t height) {
        return cdqag::MaskToJson(cdqag::RleEncode(bits, width, height)).dump();
      },
      py::arg("bits"), py::arg("width"), py::arg("height"));
  m.def(
      "rle_decode",
      [](const std::string& mask_json) {
        return cdqag::RleDecode(cdqag::MaskFromJson(nlohmann::json::parse(mask_json)));
      },
      py::arg("mask_json"));

  m.def(
      "answer",
      [](const std::string& qtype, const std::vector<int>& t1, const std::vector<int>& t2,
         std::size_t width, std::size_t height, const std::vector<std::string>& names,
         std::optional<std::size_t> subject, bool net) {
        const auto type = cdqag::ParseQuestionType(qtype);
        if (!type) throw cdqag::Error(cdqag::ErrorCode::kMalformedFile, "unknown qtype " + qtype);
        const cdqag::ClassTaxonomy tax(names);
        const auto pair = PairFromLists(t1, t2, width, height, tax.size());
        const cdqag::AnswerEngine engine(
            pair, tax, net ? cdqag::ChangeMeasure::kNet : cdqag::ChangeMeasure::kGross);
        const auto a = engine.Evaluate(*type, subject);
        return py::make_tuple(a.token, cdqag::MaskToJson(a.mask).dump());
      },
      py::arg("qtype"), py::arg("t1"), py::arg("t2"), py::arg("width"), py::arg("height"),
      py::arg("names"), py::arg("subject") = py::none(), py::arg("net") = false);

  m.def(
      "generate_jsonl",
      [](const std::string& pairs_dir, std::uint64_t seed, std::size_t workers,
         std::optional<std::string> taxonomy) {
        const auto tax = TaxonomyIn(pairs_dir, taxonomy);
        std::vector<cdqag::MaskPair> pairs;
        for (const auto& id : cdqag::DiscoverPairs(pairs_dir)) {
          pairs.push_back(cdqag::LoadPair(pairs_dir, id, tax));
        }
        py::gil_scoped_release release;
        return cdqag::TripletsToJsonl(cdqag::GenerateDataset(pairs, tax, {}, seed, workers));
      },
      py::arg("pairs_dir"), py::arg("seed") = 0, py::arg("workers") = 1,
      py::arg("taxonomy") = py::none());

  m.def(
      "stats_json",
      [](const std::string& jsonl) {
        return cdqag::StatsToJson(cdqag::DatasetStats(cdqag::ParseJsonl(jsonl))).dump();
      },
      py::arg("jsonl"));

  m.def(
      "split_json",
      [](const std::string& jsonl, std::uint64_t seed, double train, double val, double test) {
        const auto triplets = cdqag::ParseJsonl(jsonl);
        return cdqag::SplitManifest(cdqag::SplitDataset(triplets, {train, val, test}, seed))
            .dump();
      },
      py::arg("jsonl"), py::arg("seed") = 0, py::arg("train") = 0.7, py::arg("val") = 0.1,
      py::arg("test") = 0.2);

  m.def(
      "iou",
      [](const std::string& pred, const std::string& gt) {
        return cdqag::Iou(cdqag::MaskFromJson(nlohmann::json::parse(pred)),
                          cdqag::MaskFromJson(nlohmann::json::parse(gt)));
      },
      py::arg("pred_json"), py::arg("gt_json"));

  m.def(
      "binarize",
      [](const std::vector<double>& scores, std::size_t width, std::size_t height,
         double threshold, bool logits) {
        return cdqag::MaskToJson(
                   cdqag::Binarize({width, height, scores}, threshold, logits))
            .dump();
      },
      py::arg("scores"), py::arg("width"), py::arg("height"),
      py::arg("threshold") = cdqag::kDefaultThreshold, py::arg("logits") = false);

  m.def(
      "evaluate_json",
      [](const std::string& gt_path, const std::string& pred_path, double threshold,
         bool logits, bool missing_as_wrong, std::size_t workers) {
        const auto gts = cdqag::ParseJsonl(cdqag::ReadFile(gt_path));
        const auto preds = cdqag::LoadPredictions(pred_path);
        cdqag::EvalOptions o;
        o.threshold = threshold;
        o.scores_are_logits = logits;
        o.missing_as_wrong = missing_as_wrong;
        o.workers = workers;
        return cdqag::ReportToJson(cdqag::Evaluate(preds, gts, o)).dump();
      },
      py::arg("gt_path"), py::arg("pred_path"), py::arg("threshold") = cdqag::kDefaultThreshold,
      py::arg("logits") = false, py::arg("missing_as_wrong") = false, py::arg("workers") = 1);

  m.def(
      "gradcheck_json",
      [](std::uint64_t seed, std::size_t instances) {
        py::gil_scoped_release release;
        return cdqag::GradCheckToJson(cdqag::RunGradCheckSuite(seed, instances)).dump();
      },
      py::arg("seed") = 0, py::arg("instances") = 50);

  m.def(
      "microfit_csv",
      [](std::uint64_t seed, std::size_t steps, double lr) {
        py::gil_scoped_release release;
        const auto sample = cdqag::MakeSyntheticSample(seed);
        cdqag::HeadParams heads{sample.params.dynamic_head, sample.params.classifier};
        cdqag::MicroFitOptions o;
        o.steps = steps;
        o.lr = lr;
        return cdqag::TraceToCsv(cdqag::MicroFit(heads, sample.fit, o));
      },
      py::arg("seed") = 42, py::arg("steps") = 200, py::arg("lr") = 0.05);
}
