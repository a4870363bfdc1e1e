#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include <json.hpp>

#include "b2t/error.hpp"
#include "b2t/keyword_miner.hpp"
#include "b2t/text_util.hpp"

using namespace b2t;

namespace {

std::string fixture(const std::string& name) { return std::string(B2T_FIXTURE_DIR) + "/yake/" + name; }

std::vector<CaptionRecord> captions_of(const std::vector<std::string>& texts) {
  std::vector<CaptionRecord> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back({"c" + std::to_string(i), texts[i], text::normalize_caption(texts[i])});
  }
  return out;
}

std::vector<Keyword> kws(std::initializer_list<std::pair<const char*, double>> items) {
  std::vector<Keyword> out;
  for (auto [p, s] : items) out.push_back({p, s, 1});
  return out;
}

std::vector<std::string> phrases(const std::vector<Keyword>& k) {
  std::vector<std::string> out;
  for (const auto& x : k) out.push_back(x.phrase);
  return out;
}

}  // namespace

TEST(ExtractKeywords, EmptyCorpus) {
  EXPECT_TRUE(extract_keywords({}, ExtractionConfig{}).empty());
}

TEST(ExtractKeywords, ManWearingHatMatchesReference) {
  std::vector<std::string> texts(50, "a man wearing a hat");
  auto out = extract_keywords(captions_of(texts), ExtractionConfig{});
  auto golden = nlohmann::json::parse(std::ifstream(fixture("man_hat.golden.json")));
  ASSERT_EQ(out.size(), golden.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].phrase, golden[i]["phrase"].get<std::string>());
    EXPECT_NEAR(out[i].yake_score, golden[i]["score"].get<double>(), 1e-9);
  }
  auto p = phrases(out);
  EXPECT_NE(std::find(p.begin(), p.end(), "man"), p.end());
  EXPECT_NE(std::find(p.begin(), p.end(), "hat"), p.end());
  EXPECT_EQ(std::find(p.begin(), p.end(), "a"), p.end());
}

class GoldenCorpus : public ::testing::TestWithParam<const char*> {};

TEST_P(GoldenCorpus, FullListMatchesReference) {
  auto caps = read_captions(fixture(std::string(GetParam()) + ".jsonl"));
  auto out = extract_keywords(caps, ExtractionConfig{});
  auto golden = nlohmann::json::parse(std::ifstream(fixture(std::string(GetParam()) + ".golden.json")));
  ASSERT_EQ(out.size(), golden.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].phrase, golden[i]["phrase"].get<std::string>()) << "rank " << i;
    EXPECT_NEAR(out[i].yake_score, golden[i]["score"].get<double>(), 1e-9) << out[i].phrase;
  }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, GoldenCorpus,
                         ::testing::Values("blond_wrong", "waterbird_wrong", "landbird_wrong", "nurse_generated",
                                           "firefighter_generated"));

TEST(ExtractKeywords, OutputInvariants) {
  auto caps = read_captions(fixture("waterbird_wrong.jsonl"));
  for (int n = 1; n <= 3; ++n) {
    ExtractionConfig cfg;
    cfg.max_ngram = n;
    cfg.top_k = 10;
    auto out = extract_keywords(caps, cfg);
    ASSERT_LE(out.size(), 10u);
    const auto& sw = StopwordList::english();
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto toks = text::split_ws(out[i].phrase);
      EXPECT_GE(toks.size(), 1u);
      EXPECT_LE(toks.size(), static_cast<std::size_t>(n));
      EXPECT_FALSE(sw.contains(toks.front()));
      EXPECT_FALSE(sw.contains(toks.back()));
      EXPECT_GE(out[i].support, 1u) << out[i].phrase;
      if (i > 0) EXPECT_LE(out[i - 1].yake_score, out[i].yake_score);
    }
    EXPECT_EQ(out, extract_keywords(caps, cfg));
  }
}

TEST(ExtractKeywords, ConfigValidation) {
  ExtractionConfig cfg;
  cfg.max_ngram = 4;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.dedup_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.top_k = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(DedupKeywords, Examples) {
  EXPECT_EQ(phrases(dedup_keywords(kws({{"forest", 0.01}, {"forests", 0.02}}), 0.9)),
            (std::vector<std::string>{"forest", "forests"}));
  EXPECT_EQ(phrases(dedup_keywords(kws({{"forest", 0.01}, {"forests", 0.02}}), 0.85)),
            (std::vector<std::string>{"forest"}));
  auto same = dedup_keywords(kws({{"man", 0.01}, {"man", 0.02}}), 0.9);
  ASSERT_EQ(same.size(), 1u);
  EXPECT_DOUBLE_EQ(same[0].yake_score, 0.01);
  EXPECT_EQ(phrases(dedup_keywords(kws({{"solo", 0.3}}), 0.9)), (std::vector<std::string>{"solo"}));
}

TEST(DedupKeywords, Idempotent) {
  auto in = kws({{"bird", 0.1}, {"birds", 0.11}, {"bird on", 0.12}, {"water", 0.2}, {"waters", 0.3}, {"wate", 0.4}});
  for (double thr : {0.5, 0.7, 0.8, 0.9, 1.0}) {
    auto once = dedup_keywords(in, thr);
    EXPECT_EQ(dedup_keywords(once, thr), once);
  }
}

TEST(EnsembleKeywords, SetOperations) {
  std::vector<std::vector<Keyword>> lists = {kws({{"beach", 0.1}, {"ocean", 0.2}}), kws({{"beach", 0.05}, {"boat", 0.3}})};
  auto inter = ensemble_keywords(lists, EnsembleRule::intersection());
  ASSERT_EQ(phrases(inter), (std::vector<std::string>{"beach"}));
  EXPECT_DOUBLE_EQ(inter[0].yake_score, 0.05);
  auto uni = ensemble_keywords(lists, EnsembleRule::union_of());
  auto uni_phrases = phrases(uni);
  EXPECT_EQ(std::set<std::string>(uni_phrases.begin(), uni_phrases.end()),
            (std::set<std::string>{"beach", "ocean", "boat"}));
  EXPECT_THROW(ensemble_keywords(lists, EnsembleRule::vote(3)), InvalidArgument);
  EXPECT_THROW(ensemble_keywords({}, EnsembleRule::union_of()), InvalidArgument);
}

// Marks of the five captioners (ClipCap, BLIP, OFA, CoCa, BLIP-2) from the
// captioner comparison table.
TEST(EnsembleKeywords, CaptionerTableVotes) {
  const std::vector<std::pair<std::string, std::vector<int>>> table = {
      {"man", {1, 1, 0, 1, 1}},   {"bamboo", {0, 1, 1, 1, 1}}, {"forest", {1, 1, 1, 1, 1}},
      {"woods", {1, 1, 0, 0, 1}}, {"trees", {0, 0, 0, 1, 1}},  {"ocean", {1, 0, 1, 1, 1}},
      {"beach", {1, 1, 1, 1, 1}}, {"surfer", {1, 0, 0, 0, 0}}, {"boat", {1, 0, 1, 1, 1}}};
  std::vector<std::vector<Keyword>> lists(5);
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      if (table[r].second[c]) lists[c].push_back({table[r].first, 0.01 * static_cast<double>(r + 1), 1});
    }
  }
  auto five = phrases(ensemble_keywords(lists, EnsembleRule::vote(5)));
  EXPECT_EQ(std::set<std::string>(five.begin(), five.end()), (std::set<std::string>{"forest", "beach"}));
  auto four = phrases(ensemble_keywords(lists, EnsembleRule::vote(4)));
  EXPECT_EQ(std::set<std::string>(four.begin(), four.end()),
            (std::set<std::string>{"man", "bamboo", "forest", "ocean", "beach", "boat"}));
}

TEST(Stopwords, ShippedListLoads) {
  const auto& sw = StopwordList::english();
  EXPECT_GT(sw.size(), 500u);
  EXPECT_TRUE(sw.contains("the"));
  EXPECT_FALSE(sw.contains("forest"));
}
