#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "b2t/corpus_store.hpp"

namespace b2t {

struct Keyword {
  std::string phrase;       // 1-3 lowercase tokens joined by single spaces
  double yake_score = 0.0;  // lower is more salient
  std::size_t support = 0;  // captions containing the phrase

  bool operator==(const Keyword&) const = default;
};

struct ExtractionConfig {
  int max_ngram = 3;  // 1 for generated-image corpora
  int top_k = 20;
  double dedup_threshold = 0.9;

  void validate() const;
};

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  // Plain text, one word per line; lowercased on load.
  static StopwordList load(const std::filesystem::path& path);
  // The English list shipped under resources/.
  static const StopwordList& english();

  bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

// Candidate phrase with its YAKE score, before deduplication and truncation.
struct ScoredCandidate {
  std::string phrase;
  double score = 0.0;
};

// Every valid YAKE candidate of `text` (n-grams up to max_ngram with no
// stopword at either boundary), ascending by score, ties by phrase.
std::vector<ScoredCandidate> yake_candidates(std::string_view text, const StopwordList& stopwords,
                                             int max_ngram);

// Joins raw captions into one document, one sentence per caption.
std::string join_captions(std::span<const CaptionRecord> captions);

std::vector<Keyword> extract_keywords(std::span<const CaptionRecord> captions,
                                      const ExtractionConfig& cfg,
                                      const StopwordList& stopwords = StopwordList::english());

// Greedy scan over `kws` (ascending by score): a keyword is kept only if its
// normalized Levenshtein similarity to every kept keyword is below `threshold`.
std::vector<Keyword> dedup_keywords(std::span<const Keyword> kws, double threshold);

struct EnsembleRule {
  enum class Mode { kUnion, kIntersection, kVote };
  Mode mode = Mode::kUnion;
  std::size_t min_votes = 1;  // kVote only

  static EnsembleRule union_of() { return {Mode::kUnion, 1}; }
  static EnsembleRule intersection() { return {Mode::kIntersection, 0}; }
  static EnsembleRule vote(std::size_t k) { return {Mode::kVote, k}; }
};

// Merges per-captioner keyword lists by phrase. Merged entries keep the
// minimum yake_score and maximum support; output is ascending by score,
// ties by phrase.
std::vector<Keyword> ensemble_keywords(std::span<const std::vector<Keyword>> per_captioner,
                                       EnsembleRule rule);

}  // namespace b2t
