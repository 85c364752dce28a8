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
// Command-line front end: generate, stats, split, eval, forward, gradcheck,
// microfit. Exit codes: 0 success, 1 checks failed, 2 input error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdqag/error.hpp"
#include "cdqag/losses.hpp"
#include "cdqag/metrics.hpp"
#include "cdqag/raster_io.hpp"
#include "cdqag/triplet_engine.hpp"
#include "cdqag/vista_model.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitChecksFailed = 1;
constexpr int kExitInputError = 2;

// CDQAG_FORGE_LOG: "quiet" (0), "info" (1, default) or "debug" (2).
int LogLevel() {
  static const int level = [] {
    const char* env = std::getenv("CDQAG_FORGE_LOG");
    if (env == nullptr) return 1;
    const std::string v = env;
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
  }();
  return level;
}

void Log(int level, const std::string& message) {
  if (LogLevel() >= level) std::cerr << message << "\n";
}

void WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cdqag::Error(cdqag::ErrorCode::kIo, "cannot write " + path);
  out << text;
}

struct CommonFlags {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double threshold = cdqag::kDefaultThreshold;
  double lambda_txt = 0.2;
  double lambda_mask = 1.0;
  double lambda_con = 1.0;
  std::string change_measure = "gross";
  std::string templates;

  cdqag::LossWeights Lambdas() const { return {lambda_txt, lambda_mask, lambda_con}; }
  cdqag::ChangeMeasure Measure() const {
    return change_measure == "net" ? cdqag::ChangeMeasure::kNet : cdqag::ChangeMeasure::kGross;
  }
  cdqag::TemplateBank Bank() const {
    if (templates.empty()) return cdqag::DefaultTemplateBank();
    try {
      return cdqag::TemplateBankFromJson(nlohmann::json::parse(cdqag::ReadFile(templates)));
    } catch (const nlohmann::json::exception& e) {
      throw cdqag::Error(cdqag::ErrorCode::kMalformedFile, templates + ": " + e.what());
    }
  }
};

void AddSeed(CLI::App* app, CommonFlags& f) {
  app->add_option("--seed", f.seed, "64-bit seed for every random draw");
}
void AddWorkers(CLI::App* app, CommonFlags& f) {
  app->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
}
void AddTemplates(CLI::App* app, CommonFlags& f) {
  app->add_option("--templates", f.templates, "template bank JSON (default: built-in)");
}
void AddMeasure(CLI::App* app, CommonFlags& f) {
  app->add_option("--change-measure", f.change_measure, "LC/SC ranking: gross or net")
      ->check(CLI::IsMember({"gross", "net"}));
}
void AddLambdas(CLI::App* app, CommonFlags& f) {
  app->add_option("--lambda-txt", f.lambda_txt, "weight of the answer loss");
  app->add_option("--lambda-mask", f.lambda_mask, "weight of the mask loss");
  app->add_option("--lambda-con", f.lambda_con, "weight of the contrastive loss");
}
void AddThreshold(CLI::App* app, CommonFlags& f) {
  app->add_option("--threshold", f.threshold, "mask binarization threshold")
      ->check(CLI::Range(0.0, 1.0));
}

cdqag::ClassTaxonomy TaxonomyFor(const std::string& explicit_path, const fs::path& dir) {
  if (!explicit_path.empty()) return cdqag::LoadTaxonomy(explicit_path);
  const fs::path fallback = dir / "taxonomy.json";
  if (fs::exists(fallback)) return cdqag::LoadTaxonomy(fallback);
  return cdqag::DefaultTaxonomy();
}

std::vector<cdqag::Triplet> ReadDataset(const std::string& path,
                                        const cdqag::ClassTaxonomy* taxonomy = nullptr) {
  return cdqag::ParseJsonl(cdqag::ReadFile(path), taxonomy);
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string pairs_dir;
  std::string taxonomy;
  std::string out;
  bool include_absent = false;
};

int RunGenerate(const GenerateArgs& a, const CommonFlags& f) {
  const cdqag::ClassTaxonomy taxonomy = TaxonomyFor(a.taxonomy, a.pairs_dir);
  const cdqag::TemplateBank bank = f.Bank();
  bank.Validate(taxonomy);
  const auto ids = cdqag::DiscoverPairs(a.pairs_dir);
  if (ids.empty()) {
    std::cerr << "no pairs found in " << a.pairs_dir << "\n";
    return kExitInputError;
  }
  std::vector<cdqag::MaskPair> pairs;
  pairs.reserve(ids.size());
  for (const auto& id : ids) pairs.push_back(cdqag::LoadPair(a.pairs_dir, id, taxonomy));

  cdqag::GenerationConfig config;
  config.include_absent = a.include_absent;
  config.change_measure = f.Measure();
  const auto triplets = cdqag::GenerateDataset(pairs, taxonomy, config, f.seed, f.workers, bank);
  WriteText(a.out, cdqag::TripletsToJsonl(triplets));

  const auto stats = cdqag::DatasetStats(triplets);
  std::string counts;
  for (std::size_t i = 0; i < cdqag::kAllQuestionTypes.size(); ++i) {
    counts += " " + std::string(cdqag::QuestionTypeName(cdqag::kAllQuestionTypes[i])) + "=" +
              std::to_string(stats.type_counts[i]);
  }
  Log(1, "generated " + std::to_string(triplets.size()) + " triplets from " +
             std::to_string(pairs.size()) + " pairs:" + counts);
  return kExitOk;
}

// --- stats / split ----------------------------------------------------------

int RunStats(const std::string& in, const std::string& out) {
  const auto triplets = ReadDataset(in);
  WriteText(out, cdqag::StatsToJson(cdqag::DatasetStats(triplets)).dump(2) + "\n");
  return kExitOk;
}

struct SplitArgs {
  std::string in;
  std::string out_dir;
  double train = 0.7, val = 0.1, test = 0.2;
};

int RunSplit(const SplitArgs& a, const CommonFlags& f) {
  const auto triplets = ReadDataset(a.in);
  const auto split = cdqag::SplitDataset(triplets, {a.train, a.val, a.test}, f.seed);
  const std::string manifest = cdqag::SplitManifest(split).dump(2) + "\n";
  if (a.out_dir.empty()) {
    std::cout << manifest;
  } else {
    fs::create_directories(a.out_dir);
    const fs::path dir = a.out_dir;
    WriteText((dir / "manifest.json").string(), manifest);
    WriteText((dir / "train.jsonl").string(), cdqag::TripletsToJsonl(split.train));
    WriteText((dir / "val.jsonl").string(), cdqag::TripletsToJsonl(split.val));
    WriteText((dir / "test.jsonl").string(), cdqag::TripletsToJsonl(split.test));
  }
  Log(1, "split " + std::to_string(triplets.size()) + " triplets: train=" +
             std::to_string(split.train.size()) + " val=" + std::to_string(split.val.size()) +
             " test=" + std::to_string(split.test.size()));
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string gt;
  std::string pred;
  std::string report;
  bool logits = false;
  bool missing_as_wrong = false;
};

int RunEval(const EvalArgs& a, const CommonFlags& f) {
  const auto gts = ReadDataset(a.gt);
  const auto preds = cdqag::LoadPredictions(a.pred);
  cdqag::EvalOptions options;
  options.threshold = f.threshold;
  options.scores_are_logits = a.logits;
  options.missing_as_wrong = a.missing_as_wrong;
  options.workers = f.workers;
  const auto report = cdqag::Evaluate(preds, gts, options);
  std::cout << cdqag::ReportToTable(report);
  if (!a.report.empty()) WriteText(a.report, cdqag::ReportToJson(report).dump(2) + "\n");
  return kExitOk;
}

// --- forward ----------------------------------------------------------------

struct ForwardArgs {
  std::string pairs_dir;
  std::string pair_id;
  std::string question;
  std::string taxonomy;
  std::string checkpoint;
  std::string save_checkpoint;
  std::string scores_out;
  std::string out;
};

int RunForward(const ForwardArgs& a, const CommonFlags& f) {
  const cdqag::ClassTaxonomy taxonomy = TaxonomyFor(a.taxonomy, a.pairs_dir);
  const cdqag::AnswerVocabulary answers(taxonomy);
  const cdqag::MaskPair pair = cdqag::LoadPair(a.pairs_dir, a.pair_id, taxonomy);

  cdqag::ModelConfig config;
  std::optional<cdqag::TextVocabulary> text_vocab;
  cdqag::VistaParams params;
  if (!a.checkpoint.empty()) {
    auto ck = cdqag::LoadCheckpoint(a.checkpoint);
    config = ck.config;
    // The stored list already starts with the three special tokens.
    std::vector<std::string> words(ck.text_vocab.begin() + 3, ck.text_vocab.end());
    text_vocab.emplace(std::move(words));
    params = std::move(ck.params);
    if (config.answer_vocab_size != answers.size()) {
      throw cdqag::Error(cdqag::ErrorCode::kShapeMismatch,
                         "checkpoint answer vocabulary does not match the taxonomy");
    }
  } else {
    text_vocab.emplace(cdqag::BuildTextVocabulary(taxonomy, f.Bank()));
    // A fresh model takes the size of the pair.
    config.height = pair.height();
    config.width = pair.width();
    config.text_vocab_size = text_vocab->size();
    config.answer_vocab_size = answers.size();
    config.seed = f.seed;
    params = cdqag::InitParams(config);
  }
  if (pair.height() != config.height || pair.width() != config.width) {
    throw cdqag::Error(cdqag::ErrorCode::kSizeMismatch,
                       "pair is " + std::to_string(pair.height()) + "x" +
                           std::to_string(pair.width()) + ", model expects " +
                           std::to_string(config.height) + "x" + std::to_string(config.width));
  }
  if (!a.save_checkpoint.empty()) {
    cdqag::SaveCheckpoint(a.save_checkpoint, config, *text_vocab, params);
  }

  const auto tokens = text_vocab->Tokenize(a.question, config.max_tokens - 2);
  const auto fwd = cdqag::Forward(cdqag::MaskToImage(pair.t1, taxonomy.size()),
                                  cdqag::MaskToImage(pair.t2, taxonomy.size()), tokens, params,
                                  config);

  std::size_t best = 0;
  for (std::size_t i = 1; i < fwd.answer_probs.size(); ++i) {
    if (fwd.answer_probs[i] > fwd.answer_probs[best]) best = i;
  }
  cdqag::ScoreGrid grid{config.width, config.height, {}};
  const cdqag::Tensor probs = cdqag::Sigmoid(fwd.head.logits);
  grid.values.assign(probs.data().begin(), probs.data().end());
  const cdqag::BinaryMask mask = cdqag::Binarize(grid, f.threshold);
  if (!a.scores_out.empty()) cdqag::WriteF32Grid(a.scores_out, grid.values);

  nlohmann::ordered_json j;
  j["pair_id"] = pair.pair_id;
  j["question"] = a.question;
  j["tokens"] = tokens;
  j["answer"] = answers.token(best);
  j["answer_prob"] = fwd.answer_probs[best];
  nlohmann::ordered_json probs_json = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < answers.size(); ++i) probs_json[answers.token(i)] = fwd.answer_probs[i];
  j["answer_probs"] = probs_json;
  j["mask"] = cdqag::MaskToJson(mask);
  if (!a.scores_out.empty()) j["scores_path"] = a.scores_out;
  nlohmann::ordered_json shapes = nlohmann::ordered_json::object();
  for (const auto& [name, shape] : fwd.diagnostics.shapes) shapes[name] = shape;
  j["shapes"] = shapes;
  WriteText(a.out, j.dump(2) + "\n");
  Log(2, "attention row-sum error " + std::to_string(fwd.diagnostics.MaxRowSumError()));
  return kExitOk;
}

// --- gradcheck / microfit ---------------------------------------------------

struct GradCheckArgs {
  std::size_t instances = 50;
  double step = cdqag::kGradCheckStep;
  double tolerance = cdqag::kGradCheckTolerance;
  std::string out;
};

int RunGradCheck(const GradCheckArgs& a, const CommonFlags& f) {
  const auto report = cdqag::RunGradCheckSuite(f.seed, a.instances, a.step, a.tolerance);
  WriteText(a.out, cdqag::GradCheckToJson(report).dump(2) + "\n");
  Log(1, report.pass ? "gradcheck: all blocks pass" : "gradcheck: FAILED");
  return report.pass ? kExitOk : kExitChecksFailed;
}

struct MicroFitArgs {
  std::size_t steps = 200;
  double lr = 0.05;
  std::string out;
};

int RunMicroFit(const MicroFitArgs& a, const CommonFlags& f) {
  const auto sample = cdqag::MakeSyntheticSample(f.seed);
  cdqag::HeadParams heads{sample.params.dynamic_head, sample.params.classifier};
  const auto trace =
      cdqag::MicroFit(heads, sample.fit, {a.steps, a.lr, f.Lambdas()});
  WriteText(a.out, cdqag::TraceToCsv(trace));
  const double ratio = trace.back().total / trace.front().total;
  char line[128];
  std::snprintf(line, sizeof line, "microfit: total %.6f -> %.6f (ratio %.4f)",
                trace.front().total, trace.back().total, ratio);
  Log(1, line);
  return ratio <= 0.5 ? kExitOk : kExitChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change question answering and grounding toolkit"};
  app.require_subcommand(1);
  CommonFlags flags;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "generate question/answer/mask triplets");
  generate->add_option("pairs_dir", gen.pairs_dir, "directory of <id>_t1.pgm/<id>_t2.pgm")
      ->required();
  generate->add_option("--taxonomy", gen.taxonomy, "taxonomy JSON (default: <dir>/taxonomy.json)");
  generate->add_option("-o,--out", gen.out, "output JSONL (default: stdout)");
  generate->add_flag("--include-absent", gen.include_absent,
                     "ask about classes absent from both images");
  AddSeed(generate, flags);
  AddWorkers(generate, flags);
  AddTemplates(generate, flags);
  AddMeasure(generate, flags);

  std::string stats_in, stats_out;
  auto* stats = app.add_subcommand("stats", "dataset statistics as JSON");
  stats->add_option("dataset", stats_in, "triplet JSONL")->required();
  stats->add_option("-o,--out", stats_out, "output JSON (default: stdout)");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "image-wise train/val/test split");
  split->add_option("dataset", split_args.in, "triplet JSONL")->required();
  split->add_option("-o,--out-dir", split_args.out_dir,
                    "write manifest.json and per-split JSONL here (default: manifest to stdout)");
  split->add_option("--train", split_args.train, "train fraction");
  split->add_option("--val", split_args.val, "validation fraction");
  split->add_option("--test", split_args.test, "test fraction");
  AddSeed(split, flags);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("gt", eval_args.gt, "ground-truth JSONL")->required();
  eval->add_option("pred", eval_args.pred, "prediction JSONL")->required();
  eval->add_option("--report", eval_args.report, "write the JSON report here");
  eval->add_flag("--logits", eval_args.logits, "score files hold logits");
  eval->add_flag("--missing-as-wrong", eval_args.missing_as_wrong,
                 "score missing predictions as wrong instead of failing");
  AddThreshold(eval, flags);
  AddWorkers(eval, flags);

  ForwardArgs fwd;
  auto* forward = app.add_subcommand("forward", "run the model on one pair and question");
  forward->add_option("pairs_dir", fwd.pairs_dir, "directory holding the pair")->required();
  forward->add_option("pair_id", fwd.pair_id, "pair id")->required();
  forward->add_option("question", fwd.question, "question text")->required();
  forward->add_option("--taxonomy", fwd.taxonomy, "taxonomy JSON");
  forward->add_option("--checkpoint", fwd.checkpoint,
                      "checkpoint prefix (default: seeded initialization)");
  forward->add_option("--save-checkpoint", fwd.save_checkpoint, "write the weights here");
  forward->add_option("--scores-out", fwd.scores_out, "write mask probabilities (f32 LE)");
  forward->add_option("-o,--out", fwd.out, "output JSON (default: stdout)");
  AddSeed(forward, flags);
  AddThreshold(forward, flags);
  AddTemplates(forward, flags);

  GradCheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  gradcheck->add_option("--instances", gc.instances, "random instances per loss");
  gradcheck->add_option("--step", gc.step, "central-difference step");
  gradcheck->add_option("--tol", gc.tolerance, "relative error tolerance");
  gradcheck->add_option("-o,--out", gc.out, "output JSON (default: stdout)");
  AddSeed(gradcheck, flags);

  MicroFitArgs mf;
  auto* microfit = app.add_subcommand("microfit", "fit the output heads on a synthetic sample");
  microfit->add_option("--steps", mf.steps, "gradient steps");
  microfit->add_option("--lr", mf.lr, "learning rate");
  microfit->add_option("-o,--out", mf.out, "output CSV (default: stdout)");
  AddSeed(microfit, flags);
  AddLambdas(microfit, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (generate->parsed()) return RunGenerate(gen, flags);
    if (stats->parsed()) return RunStats(stats_in, stats_out);
    if (split->parsed()) return RunSplit(split_args, flags);
    if (eval->parsed()) return RunEval(eval_args, flags);
    if (forward->parsed()) return RunForward(fwd, flags);
    if (gradcheck->parsed()) return RunGradCheck(gc, flags);
    if (microfit->parsed()) return RunMicroFit(mf, flags);
  } catch (const cdqag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == cdqag::ErrorCode::kDivergence ? kExitChecksFailed : kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
