#include <gtest/gtest.h>

#include <json.hpp>
#include <cstdlib>
#include <sys/wait.h>

#include "b2t/clip_bias_scorer.hpp"
#include "b2t/pipeline.hpp"
#include "b2t/sd_bias_scorer.hpp"
#include "b2t/synth_world.hpp"
#include "test_util.hpp"

using namespace b2t;
using b2t::testing::TempDir;
using b2t::testing::read_text;
using b2t::testing::write_text;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult b2t_run(const std::string& args, const fs::path& scratch) {
  fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  std::string cmd = std::string("'") + B2T_CLI + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

json load(const fs::path& p) { return json::parse(read_text(p)); }

// One synthetic world shared by the tests in this file.
class CliWorld : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    CliResult r = b2t_run("synth --seed 7 --n 600 --out '" + (dir_->path() / "world").string() + "'", dir_->path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path world() { return dir_->path() / "world"; }
  static std::string manifest() { return "--manifest '" + (world() / "manifest.json").string() + "'"; }
  static TempDir* dir_;
};

TempDir* CliWorld::dir_ = nullptr;

}  // namespace

TEST(Cli, MissingManifestExitsTwo) {
  TempDir dir;
  CliResult r = b2t_run("extract --manifest '" + (dir / "nope.json").string() + "'", dir.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("manifest not found"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(b2t_run("", dir.path()).code, 2);
  EXPECT_EQ(b2t_run("extract --bogus", dir.path()).code, 2);
  EXPECT_EQ(b2t_run("synth --out '" + (dir / "w").string() + "'", dir.path()).code, 2);
  EXPECT_EQ(b2t_run("--help", dir.path()).code, 0);
}

TEST(Cli, EmptyCaptionsGiveEmptyKeywordList) {
  TempDir dir;
  write_text(dir / "captions.jsonl", "");
  write_text(dir / "manifest.json", R"({"kind": "generated", "captions": "captions.jsonl", "prompt": "a nurse"})");
  CliResult r = b2t_run("extract --manifest '" + (dir / "manifest.json").string() + "' --out '" + dir.path().string() + "'",
                  dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  json kw = load(dir / "keywords.json");
  ASSERT_TRUE(kw.contains("a nurse"));
  EXPECT_TRUE(kw["a nurse"].empty());
}

TEST_F(CliWorld, ExtractFindsPlantedWord) {
  TempDir out;
  CliResult r = b2t_run("extract " + manifest() + " --out '" + out.path().string() + "'", out.path());
  ASSERT_EQ(r.code, 0) << r.err;
  json kw = load(out / "keywords.json");
  bool found = false;
  for (const auto& k : kw["landbird"]) found |= k["phrase"] == "ocean";
  EXPECT_TRUE(found);
}

TEST_F(CliWorld, ScoreClipMatchesLibrary) {
  TempDir out;
  CliResult r = b2t_run("extract " + manifest() + " --out '" + out.path().string() + "'", out.path());
  ASSERT_EQ(r.code, 0) << r.err;
  r = b2t_run("score-clip " + manifest() + " --keywords '" + (out / "keywords.json").string() + "' --out '" +
                  out.path().string() + "'",
              out.path());
  ASSERT_EQ(r.code, 0) << r.err;

  fs::path m = world() / "manifest.json";
  EvaluatedSplit split = load_evaluated(m);
  auto enc = encoder_from_manifest(read_manifest(m));
  ExtractionConfig cfg;
  auto kws = extract_class_keywords(split, "landbird", cfg);
  auto lib = score_class_keywords(split, "landbird", kws, *enc);
  auto cli = read_report_csv(out / "report_landbird.csv");
  ASSERT_EQ(cli.size(), lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) {
    EXPECT_EQ(cli[i].keyword.phrase, lib[i].keyword.phrase);
    EXPECT_NEAR(cli[i].clip_score, lib[i].clip_score, 1e-12);
    EXPECT_EQ(cli[i].support, lib[i].support);
  }
  EXPECT_EQ(cli.front().keyword.phrase, "ocean");
  EXPECT_TRUE(fs::exists(out / "report_landbird.md"));
}

TEST_F(CliWorld, EvalAurocOnPlantedWord) {
  TempDir out;
  CliResult r = b2t_run("eval-auroc " + manifest() + " --keyword ocean --positive-group ocean --class landbird --out '" +
                      out.path().string() + "'",
                  out.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GE(load(out / "auroc.json")["auroc"].get<double>(), 0.95);
  std::string roc = read_text(out / "roc.csv");
  EXPECT_EQ(roc.substr(0, roc.find('\n')), "fpr,tpr,threshold");
}

TEST_F(CliWorld, InferGroupsSeparatesWorld) {
  TempDir out;
  CliResult r = b2t_run("infer-groups " + manifest() + " --design '" + (world() / "prompts.json").string() +
                      "' --positive ocean --out '" + out.path().string() + "'",
                  out.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load(out / "group_metrics.json")["f1"].get<double>(), 1.0);
  EXPECT_EQ(read_group_labels(out / "group_labels.csv").size(), 600u);
}

TEST_F(CliWorld, DebiasImprovesWorstGroup) {
  TempDir out;
  CliResult r = b2t_run("debias-prompts " + manifest() + " --design '" + (world() / "prompts.json").string() +
                      "' --evaluate --out '" + out.path().string() + "'",
                  out.path());
  ASSERT_EQ(r.code, 0) << r.err;
  json z = load(out / "zero_shot_pos.json");
  EXPECT_GT(z["pos"]["worst"].get<double>(), z["base"]["worst"].get<double>());
}

TEST_F(CliWorld, CommandsAreDeterministic) {
  TempDir a, b;
  for (const auto* d : {&a, &b}) {
    std::string o = " --out '" + d->path().string() + "'";
    ASSERT_EQ(b2t_run("synth --seed 3 --n 200" + o, d->path()).code, 0);
    ASSERT_EQ(b2t_run("extract --manifest '" + (d->path() / "manifest.json").string() + "'" + o, d->path()).code, 0);
    ASSERT_EQ(b2t_run("guidance-sim --seed 5 --samples 50" + o, d->path()).code, 0);
  }
  for (const char* f : {"keywords.json", "images.b2te", "captions.jsonl", "balance.csv", "guidance.csv"}) {
    EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
  }
}

TEST(Cli, DebiasWithWaterbirdsDesign) {
  TempDir dir;
  write_text(dir / "report.csv",
             "keyword,score,acc,support,report_score\n"
             "forest,0.0211,0.45,40,2.11\n"
             "woods,0.0179,0.5,12,1.79\n"
             "ocean,-0.015,0.9,8,-1.5\n");
  CliResult r = b2t_run("debias-prompts --design waterbirds --report '" + (dir / "report.csv").string() + "' --out '" +
                      dir.path().string() + "'",
                  dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  json ps = load(dir / "prompts_pos.json");
  bool found = false;
  for (const auto& p : ps["landbird"]) found |= p.get<std::string>().find("landbird in the forest") != std::string::npos;
  EXPECT_TRUE(found);
  EXPECT_TRUE(fs::exists(dir / "prompts_base.json"));
}

TEST(Cli, ConfigFileAndSetOverride) {
  TempDir dir;
  write_text(dir / "cfg.toml", "seed = 4\n[synth]\nn = 120\nminority-fraction = 0.1\n");
  std::string base = "--config '" + (dir / "cfg.toml").string() + "' synth --out '" + (dir / "w").string() + "'";
  ASSERT_EQ(b2t_run(base, dir.path()).code, 0);
  EXPECT_EQ(load_evaluated(dir / "w" / "manifest.json").size(), 120u);
  ASSERT_EQ(b2t_run(base + " --set n=80", dir.path()).code, 0);
  EXPECT_EQ(load_evaluated(dir / "w" / "manifest.json").size(), 80u);
  write_text(dir / "bad.toml", "[synth]\nnot-an-option = 1\n");
  EXPECT_EQ(b2t_run("--config '" + (dir / "bad.toml").string() + "' synth --seed 1", dir.path()).code, 2);
}

TEST(Cli, ScoreSdOnWrittenStore) {
  TempDir dir;
  write_text(dir / "captions.jsonl",
             "{\"id\": \"g0\", \"caption\": \"a woman in scrubs\"}\n{\"id\": \"g1\", \"caption\": \"a nurse\"}\n");
  write_text(dir / "manifest.json",
             R"({"kind": "generated", "captions": "captions.jsonl", "prompt": "a nurse", "scores": "scores"})");
  std::vector<ScoreTensor> tensors;
  for (const std::string id : {"g0", "g1"}) {
    tensors.push_back({{1, 1}, {2}, "a nurse", id, std::nullopt, std::nullopt});
    tensors.push_back({{1, 2}, {2}, "woman", id, std::nullopt, std::nullopt});
    tensors.push_back({{4, 1}, {2}, "man", id, std::nullopt, std::nullopt});
  }
  write_score_store(dir / "scores", tensors);
  CliResult r = b2t_run("score-sd --manifest '" + (dir / "manifest.json").string() +
                      "' --candidate man --candidate woman --out '" + dir.path().string() + "'",
                  dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  std::string csv = read_text(dir / "sd_report.csv");
  EXPECT_EQ(csv, "keyword,score\nwoman,1\nman,3\n");
  r = b2t_run("score-sd --noisy --manifest '" + (dir / "manifest.json").string() + "' --candidate man --out '" +
                  dir.path().string() + "'",
              dir.path());
  EXPECT_EQ(r.code, 2) << r.err;
}
