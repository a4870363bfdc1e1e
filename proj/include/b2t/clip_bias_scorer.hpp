#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "b2t/corpus_store.hpp"
#include "b2t/keyword_miner.hpp"
#include "b2t/text_encoder.hpp"

namespace b2t {

inline constexpr std::string_view kDefaultKeywordTemplate = "a photo of a [word]";

// A keyword rendered through a template with exactly one "[word]" slot.
struct PromptedKeyword {
  std::string phrase;
  std::string prompt_template{kDefaultKeywordTemplate};

  std::string prompt() const;
};

// Mean cosine similarity between a unit text embedding and unit image rows.
double sim(std::span<const float> word_emb, const EmbeddingMatrix& images);
double sim(std::span<const float> word_emb, const EmbeddingMatrix& images,
           std::span<const std::size_t> rows);

// sim(a, D_wrong) - sim(a, D_correct). Raw cosine-difference scale.
double clip_score(std::span<const float> word_emb, const EmbeddingMatrix& images,
                  const Partition& part);
double clip_score(const PromptedKeyword& word, const EvaluatedSplit& split, const Partition& part,
                  const TextEncoder& encoder);

struct SubgroupAccuracy {
  std::optional<double> acc;  // empty when support == 0
  std::size_t support = 0;
};

// Accuracy over records in `part` whose caption contains the phrase at token
// boundaries.
SubgroupAccuracy subgroup_accuracy(std::string_view phrase, const EvaluatedSplit& split,
                                   const Partition& part);

struct KeywordBiasEntry {
  Keyword keyword;
  double clip_score = 0.0;
  std::optional<double> subgroup_acc;
  std::size_t support = 0;

  // The x100 scale used by the human-readable tables.
  double report_score() const { return 100.0 * clip_score; }
};

// One entry per keyword, descending by clip_score, ties by phrase.
std::vector<KeywordBiasEntry> rank_keywords(std::span<const Keyword> kws, const EvaluatedSplit& split,
                                            const Partition& part, const TextEncoder& encoder,
                                            std::string_view prompt_template = kDefaultKeywordTemplate);

// CSV columns: keyword,score,acc,support,report_score. `score` is the raw
// cosine difference, `acc` a fraction or N/A.
void write_report_csv(const std::filesystem::path& path, std::span<const KeywordBiasEntry> entries);
std::vector<KeywordBiasEntry> read_report_csv(const std::filesystem::path& path);

// Markdown table with the keyword, report-scale score and accuracy in percent.
std::string report_markdown(std::string_view title, std::span<const KeywordBiasEntry> entries);

}  // namespace b2t
