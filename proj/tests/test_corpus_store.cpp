#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <set>
#include <variant>

#include "b2t/corpus_store.hpp"
#include "b2t/error.hpp"
#include "test_util.hpp"

using namespace b2t;
using b2t::testing::TempDir;
using b2t::testing::read_text;
using b2t::testing::write_text;

namespace {

EmbeddingMatrix unit_rows(std::size_t n, std::size_t d) {
  std::vector<float> data(n * d, 0.0f);
  for (std::size_t i = 0; i < n; ++i) data[i * d + (i % d)] = 1.0f;
  return EmbeddingMatrix(n, d, data);
}

// Three records, two correct; embeddings written in shuffled order.
std::filesystem::path small_corpus(const TempDir& dir, std::size_t embedding_rows = 3) {
  write_text(dir / "predictions.csv",
             "id,true_class,pred_class,group\n"
             "a,blond,blond,female\n"
             "b,blond,not_blond,male\n"
             "c,not_blond,not_blond,male\n");
  write_text(dir / "captions.jsonl",
             "{\"id\": \"a\", \"caption\": \"A  Woman Smiling\"}\n"
             "{\"id\": \"b\", \"caption\": \"a man with a beard\"}\n"
             "{\"id\": \"c\", \"caption\": \"a man in a suit\"}\n");
  std::vector<std::string> ids = {"c", "a", "b", "d"};
  ids.resize(embedding_rows);
  std::vector<float> data;
  for (std::size_t i = 0; i < embedding_rows; ++i) {
    data.push_back(static_cast<float>(i + 1));
    data.push_back(0.0f);
  }
  write_embeddings(dir / "images.b2te", EmbeddingMatrix(embedding_rows, 2, data), ids);
  write_text(dir / "manifest.json",
             R"({"kind": "evaluated", "predictions": "predictions.csv", "captions": "captions.jsonl",
                 "image_embeddings": "images.b2te"})");
  return dir / "manifest.json";
}

}  // namespace

TEST(NormalizeRows, ThreeFourFive) {
  EmbeddingMatrix m(1, 2, {3.0f, 4.0f});
  EmbeddingMatrix n = normalize_rows(m);
  EXPECT_TRUE(n.normalized());
  EXPECT_FLOAT_EQ(n.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(n.row(0)[1], 0.8f);
}

TEST(NormalizeRows, Idempotent) {
  std::mt19937 rng(3);
  std::normal_distribution<float> normal;
  std::vector<float> data(50 * 16);
  for (float& v : data) v = normal(rng);
  EmbeddingMatrix once = normalize_rows(EmbeddingMatrix(50, 16, data));
  EmbeddingMatrix twice = normalize_rows(once);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_NEAR(once.data()[i], twice.data()[i], 1e-7);
}

TEST(NormalizeRows, ZeroRowNamesIndex) {
  EmbeddingMatrix m(3, 2, {1, 0, 0, 0, 0, 1});
  try {
    normalize_rows(m);
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingMatrix, RejectsNonFiniteAndChecksNormalizedFlag) {
  EXPECT_THROW(EmbeddingMatrix(1, 2, {std::numeric_limits<float>::quiet_NaN(), 0.0f}), InvalidArgument);
  EXPECT_THROW(EmbeddingMatrix(1, 2, {std::numeric_limits<float>::infinity(), 0.0f}), InvalidArgument);
  EXPECT_FALSE(EmbeddingMatrix(1, 2, {1.0f, 1.0f}).normalized());
  EXPECT_TRUE(EmbeddingMatrix(1, 2, {1.0f, 0.00001f}).normalized());
}

TEST(EmbeddingFile, BinaryLayoutIsExact) {
  TempDir dir;
  write_embeddings(dir / "e.b2te", EmbeddingMatrix(1, 2, {1.0f, -2.0f}), std::vector<std::string>{"x"});
  std::string bytes = read_text(dir / "e.b2te");
  ASSERT_EQ(bytes.size(), 16u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), "B2TE");
  const unsigned char header[12] = {1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0};
  EXPECT_EQ(std::memcmp(bytes.data() + 4, header, 12), 0);
  const unsigned char payload[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(std::memcmp(bytes.data() + 16, payload, 8), 0);
  EXPECT_EQ(read_text(dir / "e.b2te.ids"), "x\n");
}

TEST(EmbeddingFile, RejectsBadMagicAndTruncation) {
  TempDir dir;
  write_text(dir / "bad.b2te", "NOPE0000000000000000");
  write_text(dir / "bad.b2te.ids", "x\n");
  EXPECT_THROW(read_embeddings(dir / "bad.b2te"), IoError);
  write_embeddings(dir / "t.b2te", EmbeddingMatrix(2, 2, {1, 0, 0, 1}), std::vector<std::string>{"a", "b"});
  std::string bytes = read_text(dir / "t.b2te");
  write_text(dir / "t.b2te", bytes.substr(0, bytes.size() - 2));
  EXPECT_THROW(read_embeddings(dir / "t.b2te"), IoError);
}

TEST(LoadCorpus, PartitionsThreeRecords) {
  TempDir dir;
  EvaluatedSplit split = load_evaluated(small_corpus(dir));
  Partition p = split.partition();
  EXPECT_EQ(p.correct.size(), 2u);
  EXPECT_EQ(p.wrong.size(), 1u);
  EXPECT_EQ(split.records()[p.wrong[0]].id, "b");
  // Rows were reordered from the file order c, a, b to the record order a, b, c.
  EXPECT_FLOAT_EQ(split.image_embeddings().row(0)[0], 1.0f);
  EXPECT_FLOAT_EQ(split.image_embeddings().row(2)[0], 1.0f);
  EXPECT_TRUE(split.image_embeddings().normalized());
  EXPECT_EQ(split.caption(0)->caption, "a woman smiling");
  EXPECT_EQ(split.caption(0)->raw, "A  Woman Smiling");
}

TEST(LoadCorpus, PartitionCoversAndIsDisjoint) {
  TempDir dir;
  EvaluatedSplit split = load_evaluated(small_corpus(dir));
  for (const std::string label : {"", "blond", "not_blond"}) {
    Partition p = label.empty() ? split.partition() : split.partition(label);
    std::set<std::size_t> c(p.correct.begin(), p.correct.end()), w(p.wrong.begin(), p.wrong.end());
    for (std::size_t i : c) EXPECT_FALSE(w.contains(i));
    std::size_t expected = 0;
    for (const auto& r : split.records()) expected += (label.empty() || r.true_class == label) ? 1 : 0;
    EXPECT_EQ(c.size() + w.size(), expected);
  }
}

TEST(LoadCorpus, RowCountMismatch) {
  TempDir dir;
  auto manifest = small_corpus(dir, 4);
  try {
    load_evaluated(manifest);
    FAIL() << "expected an error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("row count mismatch"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, IdMismatchAndMissingFiles) {
  TempDir dir;
  auto manifest = small_corpus(dir);
  write_text(dir / "captions.jsonl", "{\"id\": \"zzz\", \"caption\": \"x\"}\n");
  EXPECT_THROW(load_evaluated(manifest), IoError);
  small_corpus(dir);
  std::filesystem::remove(dir / "images.b2te");
  EXPECT_THROW(load_evaluated(manifest), IoError);
  try {
    load_corpus(dir / "absent.json");
    FAIL() << "expected an error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("manifest not found"), std::string::npos);
  }
}

TEST(LoadCorpus, RejectsUnknownManifestKeys) {
  TempDir dir;
  small_corpus(dir);
  write_text(dir / "manifest.json", R"({"captions": "captions.jsonl", "predictions": "predictions.csv",
                                        "image_embeddings": "images.b2te", "colour": "blue"})");
  EXPECT_THROW(read_manifest(dir / "manifest.json"), IoError);
}

TEST(LoadCorpus, DuplicateIdsRejected) {
  TempDir dir;
  auto manifest = small_corpus(dir);
  write_text(dir / "predictions.csv", "id,true_class,pred_class\na,x,x\na,x,y\nc,y,y\n");
  EXPECT_THROW(load_evaluated(manifest), IoError);
}

TEST(LoadCorpus, GeneratedSet) {
  TempDir dir;
  write_text(dir / "captions.jsonl", "{\"id\": \"g0\", \"caption\": \"a nurse\"}\n{\"id\": \"g1\", \"caption\": \"a woman\"}\n");
  write_text(dir / "manifest.json",
             R"({"kind": "generated", "captions": "captions.jsonl", "prompt": "a photo of a nurse", "scores": "scores"})");
  Corpus c = load_corpus(dir / "manifest.json");
  ASSERT_TRUE(std::holds_alternative<GeneratedSet>(c));
  const auto& g = std::get<GeneratedSet>(c);
  EXPECT_EQ(g.prompt, "a photo of a nurse");
  EXPECT_EQ(g.image_ids, (std::vector<std::string>{"g0", "g1"}));
  EXPECT_EQ(*g.score_store, dir / "scores");
}

TEST(WriteCorpus, RoundTripIsByteIdenticalForEmbeddings) {
  TempDir a, b;
  EvaluatedSplit split = load_evaluated(small_corpus(a));
  auto m1 = write_corpus(split, b / "one");
  EvaluatedSplit again = load_evaluated(m1);
  auto m2 = write_corpus(again, b / "two");
  EXPECT_EQ(read_text(b / "one/images.b2te"), read_text(b / "two/images.b2te"));
  EXPECT_EQ(read_text(b / "one/predictions.csv"), read_text(b / "two/predictions.csv"));
  EXPECT_EQ(read_text(b / "one/captions.jsonl"), read_text(b / "two/captions.jsonl"));
  ASSERT_EQ(again.size(), split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    EXPECT_EQ(again.records()[i].id, split.records()[i].id);
    EXPECT_EQ(again.records()[i].group, split.records()[i].group);
    EXPECT_EQ(again.caption(i)->caption, split.caption(i)->caption);
  }
  (void)m2;
}

TEST(GroupLabels, RoundTrip) {
  TempDir dir;
  std::vector<std::pair<std::string, std::string>> labels = {{"a", "land"}, {"b", "water"}, {"c,d", "land"}};
  write_group_labels(dir / "g.csv", labels);
  EXPECT_EQ(read_group_labels(dir / "g.csv"), labels);
}
