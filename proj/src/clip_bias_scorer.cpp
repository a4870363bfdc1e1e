#include "b2t/clip_bias_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "b2t/error.hpp"
#include "b2t/text_util.hpp"

namespace b2t {

namespace {

constexpr std::string_view kSlot = "[word]";

void require_unit(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (std::abs(std::sqrt(sq) - 1.0) > EmbeddingMatrix::kUnitTolerance) {
    throw InvalidArgument("text embedding is not unit-normalized");
  }
}

Eigen::VectorXf dots(std::span<const float> word_emb, const EmbeddingMatrix& images) {
  if (word_emb.size() != images.dim()) {
    throw InvalidArgument("dimension mismatch: text " + std::to_string(word_emb.size()) +
                          " vs image " + std::to_string(images.dim()));
  }
  if (!images.normalized()) throw InvalidArgument("image embeddings are not unit-normalized");
  require_unit(word_emb);
  Eigen::Map<const Eigen::VectorXf> w(word_emb.data(), static_cast<Eigen::Index>(word_emb.size()));
  return images.view() * w;
}

double mean_over(const Eigen::VectorXf& values, std::span<const std::size_t> rows) {
  double total = 0.0;
  for (std::size_t r : rows) total += values[static_cast<Eigen::Index>(r)];
  return total / static_cast<double>(rows.size());
}

std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string PromptedKeyword::prompt() const {
  std::size_t pos = prompt_template.find(kSlot);
  if (pos == std::string::npos || prompt_template.find(kSlot, pos + 1) != std::string::npos) {
    throw InvalidArgument("template must contain exactly one [word] slot: " + prompt_template);
  }
  std::string out = prompt_template;
  out.replace(pos, kSlot.size(), phrase);
  return text::collapse_whitespace(out);
}

double sim(std::span<const float> word_emb, const EmbeddingMatrix& images) {
  if (images.empty()) throw InvalidArgument("sim over an empty image set");
  Eigen::VectorXf d = dots(word_emb, images);
  return static_cast<double>(d.cast<double>().mean());
}

double sim(std::span<const float> word_emb, const EmbeddingMatrix& images,
           std::span<const std::size_t> rows) {
  if (rows.empty()) throw InvalidArgument("sim over an empty image set");
  return mean_over(dots(word_emb, images), rows);
}

double clip_score(std::span<const float> word_emb, const EmbeddingMatrix& images,
                  const Partition& part) {
  if (part.wrong.empty()) throw InvalidArgument("D_wrong is empty");
  if (part.correct.empty()) throw InvalidArgument("D_correct is empty");
  Eigen::VectorXf d = dots(word_emb, images);
  return mean_over(d, part.wrong) - mean_over(d, part.correct);
}

double clip_score(const PromptedKeyword& word, const EvaluatedSplit& split, const Partition& part,
                  const TextEncoder& encoder) {
  std::vector<float> emb = encoder.encode(word.prompt());
  return clip_score(emb, split.image_embeddings(), part);
}

SubgroupAccuracy subgroup_accuracy(std::string_view phrase, const EvaluatedSplit& split,
                                   const Partition& part) {
  std::size_t hits = 0;
  std::size_t correct_hits = 0;
  auto scan = [&](std::span<const std::size_t> rows, bool correct) {
    for (std::size_t r : rows) {
      if (split.caption(r) == nullptr) continue;
      if (!text::contains_phrase(split.caption_tokens(r), phrase)) continue;
      ++hits;
      if (correct) ++correct_hits;
    }
  };
  scan(part.correct, true);
  scan(part.wrong, false);
  SubgroupAccuracy out;
  out.support = hits;
  if (hits > 0) out.acc = static_cast<double>(correct_hits) / static_cast<double>(hits);
  return out;
}

std::vector<KeywordBiasEntry> rank_keywords(std::span<const Keyword> kws, const EvaluatedSplit& split,
                                            const Partition& part, const TextEncoder& encoder,
                                            std::string_view prompt_template) {
  std::vector<KeywordBiasEntry> out;
  out.reserve(kws.size());
  for (const Keyword& k : kws) {
    PromptedKeyword pk{k.phrase, std::string(prompt_template)};
    KeywordBiasEntry e;
    e.keyword = k;
    e.clip_score = clip_score(pk, split, part, encoder);
    SubgroupAccuracy sa = subgroup_accuracy(k.phrase, split, part);
    e.subgroup_acc = sa.acc;
    e.support = sa.support;
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const KeywordBiasEntry& a, const KeywordBiasEntry& b) {
    if (a.clip_score != b.clip_score) return a.clip_score > b.clip_score;
    return a.keyword.phrase < b.keyword.phrase;
  });
  return out;
}

void write_report_csv(const std::filesystem::path& path, std::span<const KeywordBiasEntry> entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "keyword,score,acc,support,report_score\n";
  for (const auto& e : entries) {
    out << text::csv_escape(e.keyword.phrase) << ',' << format_exact(e.clip_score) << ','
        << (e.subgroup_acc ? format_exact(*e.subgroup_acc) : std::string("N/A")) << ','
        << e.support << ',' << format_fixed(e.report_score(), 4) << '\n';
  }
}

std::vector<KeywordBiasEntry> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("report not found: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("keyword,score,acc,support", 0) != 0) {
    throw IoError(path.string() + ": not a keyword report");
  }
  std::vector<KeywordBiasEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    try {
      f = text::csv_split(line);
    } catch (const InvalidArgument&) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    if (f.size() < 4) throw IoError(path.string() + ": malformed row '" + line + "'");
    KeywordBiasEntry e;
    try {
      e.keyword.phrase = f[0];
      e.clip_score = std::stod(f[1]);
      if (f[2] != "N/A") e.subgroup_acc = std::stod(f[2]);
      e.support = static_cast<std::size_t>(std::stoul(f[3]));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    e.keyword.support = e.support;
    out.push_back(std::move(e));
  }
  return out;
}

std::string report_markdown(std::string_view title, std::span<const KeywordBiasEntry> entries) {
  std::ostringstream md;
  md << "### " << title << "\n\n";
  md << "| Keyword | Score | Acc. | Support |\n";
  md << "|:--|--:|--:|--:|\n";
  for (const auto& e : entries) {
    md << "| " << e.keyword.phrase << " | " << format_fixed(e.report_score(), 2) << " | "
       << (e.subgroup_acc ? format_fixed(100.0 * *e.subgroup_acc, 1) : std::string("N/A")) << " | "
       << e.support << " |\n";
  }
  return md.str();
}

}  // namespace b2t
