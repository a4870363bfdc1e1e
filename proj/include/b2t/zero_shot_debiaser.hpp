#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "b2t/clip_bias_scorer.hpp"
#include "b2t/corpus_store.hpp"
#include "b2t/text_encoder.hpp"

namespace b2t {

enum class PromptSource { kBase, kGroupNames, kB2tPos, kB2tNeg, kEnsemble80, kCustom };

std::string_view to_string(PromptSource s);

// Per-label prompt lists. Labels iterate in lexicographic order, which is also
// the tie-break order of classify().
struct PromptSet {
  PromptSource source = PromptSource::kCustom;
  std::map<std::string, std::vector<std::string>> prompts;
};

// JSON object {label: [prompt, ...]}.
void write_prompt_set(const std::filesystem::path& path, const PromptSet& ps);
PromptSet read_prompt_set(const std::filesystem::path& path);

// Dataset-wise templates with a "[class name]" slot and optionally a
// "[keyword]" slot, plus the class names substituted per label.
struct DebiasDesign {
  std::vector<std::string> templates;
  std::map<std::string, std::vector<std::string>> class_names;
};

// Templates with a "[group name]" slot and group names per group label.
struct GroupDesign {
  std::vector<std::string> templates;
  std::map<std::string, std::vector<std::string>> group_names;
};

struct PromptDesign {
  DebiasDesign debias;
  std::optional<GroupDesign> groups;
};

PromptDesign read_prompt_design(const std::filesystem::path& path);
void write_prompt_design(const std::filesystem::path& path, const PromptDesign& design);

// Path of a file under the shipped resources directory.
std::filesystem::path resource_path(std::string_view relative);

// One general template per line, each with a single "{}" slot.
std::vector<std::string> read_general_templates(const std::filesystem::path& path);
inline const std::vector<std::string> kPlainGeneralTemplate = {"a photo of a {}."};

enum class KeywordMode { kPos, kNeg };

struct PromptBuildOptions {
  KeywordMode mode = KeywordMode::kPos;
  double threshold = 0.0;
  // Skip keywords sharing a token with any class name.
  bool exclude_class_name_keywords = false;
  std::vector<std::string> general_templates = kPlainGeneralTemplate;
};

// general template x class name, one prompt per pair.
PromptSet build_base_prompt_set(const DebiasDesign& design,
                                std::span<const std::string> general_templates = kPlainGeneralTemplate);

// Pos mode selects keywords with clip_score > threshold, neg mode those below.
// "[keyword]" templates expand once per selected keyword. A literal template
// survives when it mentions a selected keyword or mentions no keyword from
// `keywords` at all. Surviving templates are crossed with class names and
// general templates. Throws InvalidArgument when no keyword is selected.
PromptSet build_prompt_set(const DebiasDesign& design, std::span<const KeywordBiasEntry> keywords,
                           const PromptBuildOptions& options);

PromptSet build_group_prompt_set(const GroupDesign& design,
                                 std::span<const std::string> general_templates = kPlainGeneralTemplate);

struct ClassEmbeddingTable {
  std::vector<std::string> labels;
  EmbeddingMatrix embeddings;  // one unit row per label
};

// Per label: normalize(mean(normalized prompt embeddings)) over distinct prompts.
ClassEmbeddingTable class_embeddings(const PromptSet& ps, const TextEncoder& encoder);

struct Classification {
  std::vector<std::size_t> indices;  // into the table's labels
  std::vector<std::string> labels;
  std::vector<double> margins;  // top-1 minus top-2 similarity
};

// Argmax cosine similarity; ties go to the lexicographically smaller label.
Classification classify(const EmbeddingMatrix& images, const ClassEmbeddingTable& table);

struct GroupAssignment {
  std::vector<std::string> ids;
  std::vector<std::string> groups;
  std::vector<double> margins;
};

GroupAssignment infer_group_labels(const EmbeddingMatrix& images, std::span<const std::string> ids,
                                   const PromptSet& group_prompts, const TextEncoder& encoder);

void export_group_labels(const GroupAssignment& ga, const std::filesystem::path& path);

}  // namespace b2t
