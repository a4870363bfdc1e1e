#include "b2t/zero_shot_debiaser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "b2t/error.hpp"
#include "b2t/text_util.hpp"

namespace b2t {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kClassSlot = "[class name]";
constexpr std::string_view kKeywordSlot = "[keyword]";
constexpr std::string_view kGroupSlot = "[group name]";

std::size_t count_of(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

// Collapses whitespace and drops spaces left in front of punctuation by an
// empty slot, e.g. "a photo of a ." -> "a photo of a.".
std::string tidy(std::string_view prompt) {
  std::string s = text::collapse_whitespace(prompt);
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ' ' && i + 1 < s.size() && (s[i + 1] == '.' || s[i + 1] == ',')) continue;
    out.push_back(s[i]);
  }
  return out;
}

void push_unique(std::vector<std::string>& out, std::unordered_set<std::string>& seen,
                 std::string prompt) {
  if (prompt.empty()) return;
  if (seen.insert(prompt).second) out.push_back(std::move(prompt));
}

void check_general(std::span<const std::string> general) {
  if (general.empty()) throw InvalidArgument("at least one general template is required");
  for (const auto& g : general) {
    if (count_of(g, "{}") != 1) {
      throw InvalidArgument("general template must contain exactly one {} slot: '" + g + "'");
    }
  }
}

PromptSet cross(const std::map<std::string, std::vector<std::string>>& names,
                std::span<const std::string> templates, std::string_view slot,
                std::span<const std::string> general, PromptSource source) {
  check_general(general);
  if (names.empty()) throw InvalidArgument("prompt design has no labels");
  PromptSet ps;
  ps.source = source;
  for (const auto& [label, label_names] : names) {
    if (label_names.empty()) throw InvalidArgument("label '" + label + "' has no names");
    std::vector<std::string> prompts;
    std::unordered_set<std::string> seen;
    for (const auto& t : templates) {
      for (const auto& name : label_names) {
        std::string body = replace_all(t, slot, name);
        for (const auto& g : general) push_unique(prompts, seen, tidy(replace_all(g, "{}", body)));
      }
    }
    if (prompts.empty()) throw InvalidArgument("label '" + label + "' has no non-empty prompts");
    ps.prompts.emplace(label, std::move(prompts));
  }
  return ps;
}

std::map<std::string, std::vector<std::string>> names_from_json(const json& j, const char* what) {
  std::map<std::string, std::vector<std::string>> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out[it.key()] = it.value().get<std::vector<std::string>>();
  }
  if (out.empty()) throw IoError(std::string("prompt design: empty '") + what + "'");
  return out;
}

}  // namespace

std::string_view to_string(PromptSource s) {
  switch (s) {
    case PromptSource::kBase: return "base";
    case PromptSource::kGroupNames: return "group-names";
    case PromptSource::kB2tPos: return "b2t-pos";
    case PromptSource::kB2tNeg: return "b2t-neg";
    case PromptSource::kEnsemble80: return "ensemble-80";
    case PromptSource::kCustom: return "custom";
  }
  return "custom";
}

void write_prompt_set(const fs::path& path, const PromptSet& ps) {
  json j = json::object();
  for (const auto& [label, prompts] : ps.prompts) j[label] = prompts;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

PromptSet read_prompt_set(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PromptSet ps;
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw IoError(path.string() + ": prompt set must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      auto prompts = it.value().get<std::vector<std::string>>();
      if (prompts.empty()) throw IoError(path.string() + ": label '" + it.key() + "' has no prompts");
      ps.prompts.emplace(it.key(), std::move(prompts));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return ps;
}

PromptDesign read_prompt_design(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prompt design " + path.string());
  PromptDesign d;
  try {
    json j = json::parse(in);
    const json& deb = j.at("debias");
    d.debias.templates = deb.at("templates").get<std::vector<std::string>>();
    d.debias.class_names = names_from_json(deb.at("class_names"), "class_names");
    if (j.contains("groups")) {
      const json& g = j["groups"];
      d.groups = GroupDesign{g.at("templates").get<std::vector<std::string>>(),
                             names_from_json(g.at("group_names"), "group_names")};
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  for (const auto& t : d.debias.templates) {
    if (count_of(t, kClassSlot) != 1) {
      throw IoError(path.string() + ": template needs one [class name] slot: '" + t + "'");
    }
  }
  if (d.groups) {
    for (const auto& t : d.groups->templates) {
      if (count_of(t, kGroupSlot) != 1) {
        throw IoError(path.string() + ": template needs one [group name] slot: '" + t + "'");
      }
    }
  }
  return d;
}

void write_prompt_design(const fs::path& path, const PromptDesign& design) {
  json j;
  j["debias"] = {{"templates", design.debias.templates},
                 {"class_names", design.debias.class_names}};
  if (design.groups) {
    j["groups"] = {{"templates", design.groups->templates},
                   {"group_names", design.groups->group_names}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path resource_path(std::string_view relative) {
  return fs::path(B2T_RESOURCE_DIR) / fs::path(relative);
}

std::vector<std::string> read_general_templates(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line = text::collapse_whitespace(line);
    if (line.empty()) continue;
    out.push_back(line);
  }
  try {
    check_general(out);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return out;
}

PromptSet build_base_prompt_set(const DebiasDesign& design, std::span<const std::string> general) {
  const std::vector<std::string> plain = {std::string(kClassSlot)};
  return cross(design.class_names, plain, kClassSlot, general, PromptSource::kBase);
}

PromptSet build_prompt_set(const DebiasDesign& design, std::span<const KeywordBiasEntry> keywords,
                           const PromptBuildOptions& options) {
  const bool pos = options.mode == KeywordMode::kPos;
  std::set<std::string> class_tokens;
  for (const auto& [label, names] : design.class_names) {
    for (const auto& name : names) {
      for (auto& tok : text::split_ws(text::to_lower(name))) class_tokens.insert(tok);
    }
  }

  std::vector<std::string> selected;
  std::set<std::string> selected_set;
  std::vector<std::string> all_phrases;
  for (const auto& e : keywords) {
    const std::string& phrase = e.keyword.phrase;
    all_phrases.push_back(phrase);
    bool passes = pos ? e.clip_score > options.threshold : e.clip_score < options.threshold;
    if (!passes) continue;
    if (options.exclude_class_name_keywords) {
      auto toks = text::split_ws(text::to_lower(phrase));
      if (std::any_of(toks.begin(), toks.end(), [&](const auto& t) { return class_tokens.contains(t); })) {
        continue;
      }
    }
    if (selected_set.insert(phrase).second) selected.push_back(phrase);
  }
  if (selected.empty()) {
    throw InvalidArgument(std::string("no keyword has a CLIP score ") + (pos ? "above" : "below") +
                          " the threshold " + std::to_string(options.threshold) + " in " +
                          (pos ? "pos" : "neg") + " mode; adjust the threshold");
  }

  std::vector<std::string> resolved;
  for (const auto& t : design.templates) {
    if (t.find(kKeywordSlot) != std::string::npos) {
      for (const auto& k : selected) resolved.push_back(replace_all(t, kKeywordSlot, k));
      continue;
    }
    auto toks = text::tokenize(text::to_lower(replace_all(t, kClassSlot, " ")));
    bool mentions_selected = std::any_of(selected.begin(), selected.end(),
                                         [&](const auto& k) { return text::contains_phrase(toks, k); });
    bool mentions_any = std::any_of(all_phrases.begin(), all_phrases.end(),
                                    [&](const auto& k) { return text::contains_phrase(toks, k); });
    if (mentions_selected || !mentions_any) resolved.push_back(t);
  }
  return cross(design.class_names, resolved, kClassSlot, options.general_templates,
               pos ? PromptSource::kB2tPos : PromptSource::kB2tNeg);
}

PromptSet build_group_prompt_set(const GroupDesign& design, std::span<const std::string> general) {
  PromptSet ps = cross(design.group_names, design.templates, kGroupSlot, general, PromptSource::kGroupNames);
  if (ps.prompts.size() < 2) throw InvalidArgument("group inference needs at least two groups");
  return ps;
}

ClassEmbeddingTable class_embeddings(const PromptSet& ps, const TextEncoder& encoder) {
  const std::size_t d = encoder.dim();
  ClassEmbeddingTable table;
  std::vector<float> data;
  data.reserve(ps.prompts.size() * d);
  for (const auto& [label, prompts] : ps.prompts) {
    if (prompts.empty()) throw InvalidArgument("label '" + label + "' has no prompts");
    std::vector<double> mean(d, 0.0);
    std::unordered_set<std::string> seen;
    for (const auto& p : prompts) {
      if (!seen.insert(p).second) continue;
      std::vector<float> e = encoder.encode(p);
      double norm = 0.0;
      for (float v : e) norm += static_cast<double>(v) * v;
      norm = std::sqrt(norm);
      if (norm == 0.0) throw InvalidArgument("zero text embedding for prompt '" + p + "'");
      for (std::size_t k = 0; k < d; ++k) mean[k] += e[k] / norm;
    }
    double norm = 0.0;
    for (double v : mean) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9 * static_cast<double>(seen.size())) {
      throw InvalidArgument("degenerate class embedding for '" + label + "': prompt embeddings cancel");
    }
    for (double v : mean) data.push_back(static_cast<float>(v / norm));
    table.labels.push_back(label);
  }
  table.embeddings = EmbeddingMatrix(table.labels.size(), d, std::move(data));
  return table;
}

Classification classify(const EmbeddingMatrix& images, const ClassEmbeddingTable& table) {
  if (table.labels.size() < 2) throw InvalidArgument("classification needs at least two labels");
  if (images.dim() != table.embeddings.dim()) {
    throw InvalidArgument("dimension mismatch: images have d=" + std::to_string(images.dim()) +
                          ", text embeddings d=" + std::to_string(table.embeddings.dim()));
  }
  // Labels are sorted when built from a PromptSet; enforce the tie order anyway.
  std::vector<std::size_t> order(table.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return table.labels[a] < table.labels[b]; });

  RowMatrixF sims = images.view() * table.embeddings.view().transpose();
  Classification out;
  out.indices.reserve(images.rows());
  for (Eigen::Index r = 0; r < sims.rows(); ++r) {
    std::size_t best = order[0];
    float top = sims(r, static_cast<Eigen::Index>(best));
    float second = -std::numeric_limits<float>::infinity();
    for (std::size_t k = 1; k < order.size(); ++k) {
      float s = sims(r, static_cast<Eigen::Index>(order[k]));
      if (s > top) {
        second = top;
        top = s;
        best = order[k];
      } else if (s > second) {
        second = s;
      }
    }
    out.indices.push_back(best);
    out.labels.push_back(table.labels[best]);
    out.margins.push_back(static_cast<double>(top) - static_cast<double>(second));
  }
  return out;
}

GroupAssignment infer_group_labels(const EmbeddingMatrix& images, std::span<const std::string> ids,
                                   const PromptSet& group_prompts, const TextEncoder& encoder) {
  if (ids.size() != images.rows()) throw InvalidArgument("id count does not match image rows");
  if (group_prompts.prompts.size() < 2) throw InvalidArgument("group inference needs at least two groups");
  Classification c = classify(images, class_embeddings(group_prompts, encoder));
  GroupAssignment ga;
  ga.ids.assign(ids.begin(), ids.end());
  ga.groups = std::move(c.labels);
  ga.margins = std::move(c.margins);
  return ga;
}

void export_group_labels(const GroupAssignment& ga, const fs::path& path) {
  if (ga.ids.size() != ga.groups.size()) throw InvalidArgument("group assignment is ragged");
  std::vector<std::pair<std::string, std::string>> rows;
  rows.reserve(ga.ids.size());
  for (std::size_t i = 0; i < ga.ids.size(); ++i) rows.emplace_back(ga.ids[i], ga.groups[i]);
  write_group_labels(path, rows);
}

}  // namespace b2t
