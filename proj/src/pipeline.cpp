#include "b2t/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "b2t/error.hpp"

namespace b2t {

std::vector<CaptionRecord> wrong_captions(const EvaluatedSplit& split, const std::string& label) {
  std::vector<CaptionRecord> out;
  for (std::size_t i : split.partition(label).wrong) {
    if (const CaptionRecord* c = split.caption(i)) out.push_back(*c);
  }
  return out;
}

std::vector<Keyword> extract_class_keywords(const EvaluatedSplit& split, const std::string& label,
                                            const ExtractionConfig& cfg, const StopwordList& stopwords) {
  std::vector<CaptionRecord> captions = wrong_captions(split, label);
  return extract_keywords(captions, cfg, stopwords);
}

std::vector<KeywordBiasEntry> score_class_keywords(const EvaluatedSplit& split, const std::string& label,
                                                   std::span<const Keyword> kws, const TextEncoder& encoder,
                                                   std::string_view prompt_template) {
  return rank_keywords(kws, split, split.partition(label), encoder, prompt_template);
}

std::vector<KeywordBiasEntry> merge_class_reports(std::span<const std::vector<KeywordBiasEntry>> reports) {
  std::map<std::string, KeywordBiasEntry> by_phrase;
  for (const auto& report : reports) {
    for (const auto& e : report) {
      auto [it, inserted] = by_phrase.emplace(e.keyword.phrase, e);
      if (!inserted && std::fabs(e.clip_score) > std::fabs(it->second.clip_score)) it->second = e;
    }
  }
  std::vector<KeywordBiasEntry> out;
  for (auto& [phrase, e] : by_phrase) out.push_back(std::move(e));
  std::stable_sort(out.begin(), out.end(), [](const KeywordBiasEntry& a, const KeywordBiasEntry& b) {
    return a.clip_score > b.clip_score;
  });
  return out;
}

ZeroShotEvaluation evaluate_zero_shot(const EvaluatedSplit& split, const PromptSet& ps,
                                      const TextEncoder& encoder) {
  ZeroShotEvaluation ev;
  ev.prediction = classify(split.image_embeddings(), class_embeddings(ps, encoder));
  std::vector<std::string> truth, groups;
  for (const auto& r : split.records()) {
    if (!r.group) throw InvalidArgument("record " + r.id + " has no ground-truth group");
    truth.push_back(r.true_class);
    groups.push_back(r.true_class + "/" + *r.group);
  }
  ev.report = group_accuracies(ev.prediction.labels, truth, groups);
  return ev;
}

}  // namespace b2t
