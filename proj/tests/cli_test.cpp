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
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "cdqag/losses.hpp"
#include "cdqag/metrics.hpp"
#include "gtest/gtest.h"
#include "json.hpp"
#include "test_support.hpp"

namespace cdqag {
namespace {

namespace fs = std::filesystem;
using ::cdqag::testing::CorpusDir;
using ::cdqag::testing::TempDir;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout and stderr together.
RunResult Cli(const std::string& args) {
  const std::string cmd = std::string(CDQAG_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Q(const fs::path& p) { return "'" + p.string() + "'"; }

void WriteText(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(CliGenerateTest, MatchesGoldenAtAnyWorkerCount) {
  const auto dir = TempDir("cli_generate");
  const auto golden = ReadFile(CorpusDir() / "golden.jsonl");
  for (int workers : {1, 8}) {
    const auto out = dir / ("w" + std::to_string(workers) + ".jsonl");
    const auto r = Cli("generate " + Q(CorpusDir()) + " --seed 7 --workers " +
                       std::to_string(workers) + " -o " + Q(out));
    ASSERT_EQ(r.exit_code, 0) << r.out;
    EXPECT_NE(r.out.find("generated 156 triplets from 3 pairs"), std::string::npos) << r.out;
    EXPECT_EQ(ReadFile(out), golden) << "workers " << workers;
  }
  const auto templated = dir / "templated.jsonl";
  ASSERT_EQ(Cli("generate " + Q(CorpusDir()) + " --seed 7 --templates " +
                Q(CorpusDir() / "templates.json") + " -o " + Q(templated))
                .exit_code,
            0);
  EXPECT_EQ(ReadFile(templated), golden);
  const auto other = Cli("generate " + Q(CorpusDir()) + " --seed 8");
  EXPECT_EQ(other.exit_code, 0);
  EXPECT_NE(other.out.find("\"question\""), std::string::npos);
}

TEST(CliGenerateTest, InputErrorsExitTwo) {
  const auto empty = TempDir("cli_empty");
  const auto r = Cli("generate " + Q(empty) + " --taxonomy " + Q(CorpusDir() / "taxonomy.json"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.out.find("no pairs found"), std::string::npos) << r.out;

  const auto bad = TempDir("cli_bad");
  WriteText(bad / "x_t1.pgm", "P2\n2 1\n255\n0 1\n");
  WriteText(bad / "x_t2.pgm", "P2\n2 1\n255\n0 77\n");
  EXPECT_EQ(Cli("generate " + Q(bad) + " --taxonomy " + Q(CorpusDir() / "taxonomy.json")).exit_code, 2);
  EXPECT_EQ(Cli("generate " + Q(CorpusDir()) + " --workers 0").exit_code, 2);
  EXPECT_EQ(Cli("no-such-command").exit_code, 2);
}

TEST(CliStatsTest, MatchesCommittedStats) {
  const auto r = Cli("stats " + Q(CorpusDir() / "golden.jsonl"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_EQ(nlohmann::json::parse(r.out),
            nlohmann::json::parse(ReadFile(CorpusDir() / "golden_stats.json")));
}

TEST(CliSplitTest, SameSeedSameManifest) {
  const auto a = TempDir("cli_split_a"), b = TempDir("cli_split_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(Cli("split " + Q(CorpusDir() / "golden.jsonl") + " --seed 7 -o " + Q(dir)).exit_code, 0);
  }
  EXPECT_EQ(ReadFile(a / "manifest.json"), ReadFile(b / "manifest.json"));
  std::size_t lines = 0;
  for (const char* part : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    lines += ParseJsonl(ReadFile(a / part)).size();
    EXPECT_EQ(ReadFile(a / part), ReadFile(b / part));
  }
  EXPECT_EQ(lines, 156u);
  EXPECT_EQ(Cli("split " + Q(CorpusDir() / "golden.jsonl") + " --train 0.9 --val 0.5 --test 0.1")
                .exit_code,
            2);
}

TEST(CliEvalTest, PerfectAndDivergentFixtures) {
  const auto dir = TempDir("cli_eval");
  const auto golden = CorpusDir() / "golden.jsonl";
  // Ground truth as predictions scores 1.0 everywhere.
  {
    std::ofstream out(dir / "perfect.jsonl");
    for (const auto& t : ParseJsonl(ReadFile(golden))) {
      nlohmann::ordered_json j;
      j["id"] = t.triplet_id;
      j["answer"] = t.answer;
      j["mask"] = MaskToJson(t.mask);
      out << j.dump() << "\n";
    }
  }
  auto r = Cli("eval " + Q(golden) + " " + Q(dir / "perfect.jsonl") + " --report " +
               Q(dir / "report.json"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("oIoU"), std::string::npos);
  const auto report = nlohmann::json::parse(ReadFile(dir / "report.json"));
  for (const char* k : {"AA", "OA", "mIoU", "oIoU"}) EXPECT_EQ(report[k], 1.0) << k;

  // One CN item right, three IN items wrong.
  WriteText(dir / "gt.jsonl",
            R"({"id":"a","pair_id":"p","qtype":"CN","time_index":1,"subject":null,"question":"Has it changed?","answer":"yes","mask":{"size":[1,2],"counts":[0,1,1]}})"
            "\n"
            R"({"id":"b","pair_id":"p","qtype":"IN","time_index":1,"subject":null,"question":"Has it grown?","answer":"yes","mask":{"size":[1,2],"counts":[2]}})"
            "\n"
            R"({"id":"c","pair_id":"p","qtype":"IN","time_index":2,"subject":null,"question":"Has it grown?","answer":"yes","mask":{"size":[1,2],"counts":[2]}})"
            "\n"
            R"({"id":"d","pair_id":"p","qtype":"IN","time_index":1,"subject":null,"question":"Has it grown?","answer":"yes","mask":{"size":[1,2],"counts":[2]}})"
            "\n");
  WriteF32Grid(dir / "a.f32", std::vector<double>{0.375, 0.25});
  WriteText(dir / "pred.jsonl",
            R"({"id":"a","answer":"yes","scores_path":"a.f32"})"
            "\n"
            R"({"id":"b","answer":"no","mask":{"size":[1,2],"counts":[2]}})"
            "\n"
            R"({"id":"c","answer":"no","mask":{"size":[1,2],"counts":[2]}})"
            "\n"
            R"({"id":"d","answer":"no","mask":{"size":[1,2],"counts":[2]}})"
            "\n");
  r = Cli("eval " + Q(dir / "gt.jsonl") + " " + Q(dir / "pred.jsonl") + " --report " +
          Q(dir / "div.json"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const auto div = nlohmann::json::parse(ReadFile(dir / "div.json"));
  EXPECT_EQ(div["AA"], 0.5);
  EXPECT_EQ(div["OA"], 0.25);
  // 0.375 is on and 0.25 is off at the default threshold, so the CN mask is exact.
  EXPECT_EQ(div["per_type"]["CN"]["miou"], 1.0);

  r = Cli("eval " + Q(dir / "gt.jsonl") + " " + Q(dir / "pred.jsonl") + " --threshold 0.4 --report " +
          Q(dir / "strict.json"));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(ReadFile(dir / "strict.json"))["per_type"]["CN"]["miou"], 0.0);

  WriteText(dir / "short.jsonl", R"({"id":"a","answer":"yes","scores_path":"a.f32"})" "\n");
  EXPECT_EQ(Cli("eval " + Q(dir / "gt.jsonl") + " " + Q(dir / "short.jsonl")).exit_code, 2);
  EXPECT_EQ(Cli("eval " + Q(dir / "gt.jsonl") + " " + Q(dir / "short.jsonl") + " --missing-as-wrong")
                .exit_code,
            0);
}

TEST(CliForwardTest, EmitsAnswerAndScores) {
  const auto dir = TempDir("cli_forward");
  const auto r = Cli("forward " + Q(CorpusDir()) +
                     " charlie 'Has the building area changed in the first image?' --seed 3"
                     " --scores-out " + Q(dir / "s.f32") + " -o " + Q(dir / "f.json") +
                     " --save-checkpoint " + Q(dir / "model"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const auto j = nlohmann::json::parse(ReadFile(dir / "f.json"));
  EXPECT_EQ(j["pair_id"], "charlie");
  EXPECT_TRUE(j.contains("answer"));
  EXPECT_EQ(j["mask"]["size"], nlohmann::json::parse("[32,32]"));
  EXPECT_EQ(ReadF32Grid(dir / "s.f32").size(), 32u * 32u);
  // Reloading the saved weights reproduces the output.
  const auto again = Cli("forward " + Q(CorpusDir()) +
                         " charlie 'Has the building area changed in the first image?'"
                         " --checkpoint " + Q(dir / "model") + " -o " + Q(dir / "g.json"));
  ASSERT_EQ(again.exit_code, 0) << again.out;
  auto reloaded = nlohmann::json::parse(ReadFile(dir / "g.json"));
  auto original = j;
  original.erase("scores_path");
  EXPECT_EQ(reloaded, original);
  // alpha is 16x16, not a multiple of 32.
  EXPECT_EQ(Cli("forward " + Q(CorpusDir()) + " alpha 'Has the road changed?'").exit_code, 2);
}

TEST(CliGradcheckTest, ExitCodeFollowsTheReport) {
  const auto dir = TempDir("cli_gradcheck");
  const auto r = Cli("gradcheck --instances 5 --seed 1 -o " + Q(dir / "g.json"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const auto j = nlohmann::json::parse(ReadFile(dir / "g.json"));
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(Cli("gradcheck --instances 2 --seed 1 --tol 1e-30 -o " + Q(dir / "h.json")).exit_code, 1);
}

TEST(CliMicrofitTest, WritesReproducibleTrace) {
  const auto dir = TempDir("cli_microfit");
  ASSERT_EQ(Cli("microfit --seed 42 -o " + Q(dir / "a.csv")).exit_code, 0);
  ASSERT_EQ(Cli("microfit --seed 42 -o " + Q(dir / "b.csv")).exit_code, 0);
  const auto csv = ReadFile(dir / "a.csv");
  EXPECT_EQ(csv, ReadFile(dir / "b.csv"));
  EXPECT_EQ(csv.rfind("step,l_txt,l_mask,l_con,total\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 202);
  EXPECT_EQ(Cli("microfit --seed 42 --steps 1 --lr 0.001 -o " + Q(dir / "c.csv")).exit_code, 1);
}

}  // namespace
}  // namespace cdqag
