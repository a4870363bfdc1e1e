#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "b2t/corpus_store.hpp"
#include "b2t/zero_shot_debiaser.hpp"

namespace b2t {

struct WorldVocab {
  std::string class_a = "landbird";  // the class carrying the planted bias
  std::string class_b = "waterbird";
  std::string bias_word = "ocean";
  std::string majority_word = "forest";
  std::vector<std::string> decoys = {"branch", "sky", "grass", "rock", "flower", "sunset"};
  std::vector<std::string> filler = {"a", "photo", "of"};
};

// Class A is half the samples; round(n * minority_fraction) of them carry the
// bias direction g instead of the majority direction m. Every class B sample
// carries g. Image rows are normalized noisy sums of anchors; minority rows
// are nudged so that cos(x, g) >= bias_strength.
struct WorldSpec {
  std::size_t n = 2000;
  std::size_t d = 64;
  double minority_fraction = 0.05;
  double bias_strength = 0.3;
  WorldVocab vocab;
  double p_wrong_minority = 0.7;
  double p_wrong_majority = 0.03;
  std::uint64_t seed = 0;

  double attribute_gain = 1.0;
  double noise_sigma = 0.35;  // per-sample N(0, sigma^2 / d) per coordinate
  double decoy_prob = 0.3;
  double decoy_strength = 0.8;
  double class_word_attribute = 1.0;  // weight of m (resp. g) in the class-A (B) word vector
  double text_noise = 0.1;
  double filler_weight = 0.5;  // total filler weight of "a photo of a"
  double mention_minority = 0.9;
  double mention_majority = 0.05;

  void validate() const;
};

struct SynthWorld {
  WorldSpec spec;
  EvaluatedSplit split;           // ground-truth group column: bias_word or majority_word
  EmbeddingFile word_vectors;     // ids are words
  std::vector<bool> minority;     // aligned with split records
  std::vector<std::string> minority_ids;

  const std::string& planted_keyword() const { return spec.vocab.bias_word; }
  const std::string& target_class() const { return spec.vocab.class_a; }
};

SynthWorld generate_world(const WorldSpec& spec);

// Debias templates "[class name]" and "[class name] [keyword]", groups named
// by the bias and majority words.
PromptDesign world_prompt_design(const WorldSpec& spec);

// Writes the corpus, word_vectors.b2te and prompts.json; returns the manifest.
std::filesystem::path write_world(const SynthWorld& world, const std::filesystem::path& dir);

// Naive references that share no code with the scorers.
namespace oracle {

// Sum of word vectors over whitespace-separated tokens (trailing '.' ignored).
std::vector<double> text_embedding(const SynthWorld& world, const std::string& prompt);

// Mean cosine between `word` and the image rows in `rows`.
double sim(const SynthWorld& world, const std::vector<double>& word, const std::vector<std::size_t>& rows);

// CLIP score over the records of `label`, partitions derived from the records.
double clip_score(const SynthWorld& world, const std::vector<double>& word, const std::string& label);

// Pair counting with 0.5 credit for ties.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace oracle

}  // namespace b2t
