#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "b2t/clip_bias_scorer.hpp"
#include "b2t/eval_metrics.hpp"
#include "b2t/keyword_miner.hpp"
#include "b2t/zero_shot_debiaser.hpp"

namespace b2t {

// Captions of the mispredicted images whose true class is `label`.
std::vector<CaptionRecord> wrong_captions(const EvaluatedSplit& split, const std::string& label);

std::vector<Keyword> extract_class_keywords(const EvaluatedSplit& split, const std::string& label,
                                            const ExtractionConfig& cfg,
                                            const StopwordList& stopwords = StopwordList::english());

// Keywords scored against the class-restricted partition of `label`.
std::vector<KeywordBiasEntry> score_class_keywords(const EvaluatedSplit& split, const std::string& label,
                                                   std::span<const Keyword> kws, const TextEncoder& encoder,
                                                   std::string_view prompt_template = kDefaultKeywordTemplate);

// Combines per-class reports into one keyword list. A phrase listed by
// several classes keeps the entry with the largest |clip_score|. Output is
// descending by score, ties by phrase.
std::vector<KeywordBiasEntry> merge_class_reports(std::span<const std::vector<KeywordBiasEntry>> reports);

struct ZeroShotEvaluation {
  Classification prediction;
  // Groups are "<true class>/<group>"; needs the ground-truth group column.
  GroupAccuracyReport report;
};

ZeroShotEvaluation evaluate_zero_shot(const EvaluatedSplit& split, const PromptSet& ps,
                                      const TextEncoder& encoder);

}  // namespace b2t
