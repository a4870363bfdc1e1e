#include "b2t/keyword_miner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "b2t/error.hpp"
#include "b2t/text_util.hpp"

namespace b2t {

namespace {

// Term tags follow the reference extractor: d = number, u = unusual,
// a = acronym, n = proper noun (capitalized, not sentence-initial), p = plain.
char term_tag(std::string_view word, std::size_t position) {
  auto digits_only = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  std::string no_commas;
  for (char c : word) {
    if (c != ',') no_commas.push_back(c);
  }
  if (digits_only(no_commas)) return 'd';
  if (auto dot = no_commas.find('.'); dot != std::string::npos) {
    std::string no_dot = no_commas;
    no_dot.erase(dot, 1);
    if (digits_only(no_dot)) return 'd';
  }

  int n_digit = 0;
  int n_alpha = 0;
  int n_punct = 0;
  int n_upper = 0;
  int n_lower = 0;
  for (char ch : word) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= '0' && c <= '9') ++n_digit;
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) ++n_alpha;
    if (text::is_ascii_punct(ch)) ++n_punct;
    if (c >= 'A' && c <= 'Z') ++n_upper;
    if (c >= 'a' && c <= 'z') ++n_lower;
  }
  if ((n_digit > 0 && n_alpha > 0) || (n_digit == 0 && n_alpha == 0) || n_punct > 1) return 'u';
  if (n_upper > 0 && n_lower == 0) return 'a';
  if (word.size() > 1 && word[0] >= 'A' && word[0] <= 'Z' && position > 0 && n_upper == 1) {
    return 'n';
  }
  return 'p';
}

bool discarded(char tag) { return tag == 'u' || tag == 'd'; }

struct Term {
  bool stopword = false;
  double tf = 0.0;
  double tf_a = 0.0;
  double tf_n = 0.0;
  std::vector<int> sentences;  // distinct sentence ids, in first-seen order
  double h = 0.0;
};

struct Candidate {
  std::string phrase;  // lowercased surface form
  std::vector<int> terms;
  std::vector<std::string> tag_strings;
  bool boundary_stopword = true;
  double tf = 0.0;
  double h = 0.0;

  bool valid() const {
    bool any_clean = std::any_of(tag_strings.begin(), tag_strings.end(), [](const std::string& t) {
      return t.find('u') == std::string::npos && t.find('d') == std::string::npos;
    });
    return any_clean && !boundary_stopword;
  }
};

struct BlockWord {
  char tag;
  std::string word;
  int term;
};

class Document {
 public:
  Document(const StopwordList& stopwords, int max_ngram) : stopwords_(stopwords), n_(max_ngram) {}

  void build(std::string_view text) {
    std::vector<std::string> sentences = text::split_sentences(text);
    num_sentences_ = static_cast<int>(sentences.size());
    for (int sid = 0; sid < num_sentences_; ++sid) {
      std::vector<std::string> tokens = text::tokenize(sentences[sid]);
      std::vector<BlockWord> block;
      for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        const std::string& word = tokens[pos];
        if (text::is_all_punct(word)) {
          block.clear();
          continue;
        }
        add_word(word, pos, sid, block);
      }
    }
  }

  void score_terms() {
    std::vector<double> valid_tfs;
    double max_tf = 0.0;
    for (const Term& t : terms_) {
      if (!t.stopword) valid_tfs.push_back(t.tf);
      max_tf = std::max(max_tf, t.tf);
    }
    if (valid_tfs.empty()) return;
    double mean = std::accumulate(valid_tfs.begin(), valid_tfs.end(), 0.0) / valid_tfs.size();
    double var = 0.0;
    for (double v : valid_tfs) var += (v - mean) * (v - mean);
    double stddev = std::sqrt(var / valid_tfs.size());

    std::vector<double> out_distinct(terms_.size(), 0.0), out_total(terms_.size(), 0.0);
    std::vector<double> in_distinct(terms_.size(), 0.0), in_total(terms_.size(), 0.0);
    for (const auto& [edge, weight] : edges_) {
      out_distinct[edge.first] += 1.0;
      out_total[edge.first] += weight;
      in_distinct[edge.second] += 1.0;
      in_total[edge.second] += weight;
    }

    for (std::size_t i = 0; i < terms_.size(); ++i) {
      Term& t = terms_[i];
      double pwr = out_total[i] == 0.0 ? 0.0 : out_distinct[i] / out_total[i];
      double pwl = in_total[i] == 0.0 ? 0.0 : in_distinct[i] / in_total[i];
      double relatedness = (0.5 + pwl * (t.tf / max_tf)) + (0.5 + pwr * (t.tf / max_tf));
      double frequency = t.tf / (mean + stddev);
      double spread = static_cast<double>(t.sentences.size()) / num_sentences_;
      double casing = std::max(t.tf_a, t.tf_n) / (1.0 + std::log(t.tf));
      double position = std::log(std::log(3.0 + median(t.sentences)));
      t.h = (position * relatedness) /
            (casing + (frequency / relatedness) + (spread / relatedness));
    }
  }

  void score_candidates() {
    for (Candidate& c : candidates_) {
      if (!c.valid()) continue;
      double sum_h = 0.0;
      double prod_h = 1.0;
      for (std::size_t k = 0; k < c.terms.size(); ++k) {
        const Term& t = terms_[c.terms[k]];
        if (!t.stopword) {
          sum_h += t.h;
          prod_h *= t.h;
          continue;
        }
        // Interior stopwords weigh in by how strongly they bind their neighbours.
        double p_left = 0.0;
        if (k > 0) {
          auto it = edges_.find({c.terms[k - 1], c.terms[k]});
          if (it != edges_.end()) p_left = it->second / terms_[c.terms[k - 1]].tf;
        }
        double p_right = 0.0;
        if (k + 1 < c.terms.size()) {
          auto it = edges_.find({c.terms[k], c.terms[k + 1]});
          if (it != edges_.end()) p_right = it->second / terms_[c.terms[k + 1]].tf;
        }
        double prob = p_left * p_right;
        prod_h *= 1.0 + (1.0 - prob);
        sum_h -= 1.0 - prob;
      }
      c.h = prod_h / ((sum_h + 1.0) * c.tf);
    }
  }

  std::vector<ScoredCandidate> ranked() const {
    std::vector<ScoredCandidate> out;
    for (const Candidate& c : candidates_) {
      if (c.valid()) out.push_back({c.phrase, c.h});
    }
    std::sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
      if (a.score != b.score) return a.score < b.score;
      return a.phrase < b.phrase;
    });
    return out;
  }

 private:
  static double median(std::vector<int> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (static_cast<double>(values[n / 2 - 1]) + values[n / 2]) / 2.0;
  }

  int term_id(const std::string& word) {
    std::string key = text::to_lower(word);
    bool plain_stopword = stopwords_.contains(key);
    if (key.size() > 3 && key.back() == 's') key.pop_back();
    if (auto it = term_index_.find(key); it != term_index_.end()) return it->second;
    std::size_t letters = 0;
    for (char32_t cp : text::utf8_decode(key)) {
      if (!(cp < 128 && text::is_ascii_punct(static_cast<char>(cp)))) ++letters;
    }
    Term t;
    t.stopword = plain_stopword || stopwords_.contains(key) || letters < 3;
    int id = static_cast<int>(terms_.size());
    terms_.push_back(std::move(t));
    term_index_.emplace(std::move(key), id);
    return id;
  }

  void add_word(const std::string& word, std::size_t pos, int sid, std::vector<BlockWord>& block) {
    char tag = term_tag(word, pos);
    int id = term_id(word);
    Term& t = terms_[id];
    if (std::find(t.sentences.begin(), t.sentences.end(), sid) == t.sentences.end()) {
      t.sentences.push_back(sid);
    }
    t.tf += 1.0;
    if (tag == 'a') t.tf_a += 1.0;
    if (tag == 'n') t.tf_n += 1.0;

    if (!discarded(tag) && !block.empty() && !discarded(block.back().tag)) {
      edges_[{block.back().term, id}] += 1.0;
    }

    std::vector<const BlockWord*> reversed;
    BlockWord current{tag, word, id};
    reversed.push_back(&current);
    register_candidate(reversed);
    std::size_t lookback = static_cast<std::size_t>(n_ - 1);
    std::size_t stop = block.size() > lookback ? block.size() - lookback : 0;
    for (std::size_t w = block.size(); w-- > stop;) {
      reversed.push_back(&block[w]);
      register_candidate(reversed);
    }
    block.push_back(std::move(current));
  }

  void register_candidate(const std::vector<const BlockWord*>& reversed) {
    std::string surface;
    std::string tags;
    std::vector<int> ids;
    for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
      if (!surface.empty()) surface.push_back(' ');
      surface += (*it)->word;
      tags.push_back((*it)->tag);
      ids.push_back((*it)->term);
    }
    std::string phrase = text::to_lower(surface);
    auto [it, inserted] = candidate_index_.try_emplace(phrase, candidates_.size());
    if (inserted) {
      Candidate c;
      c.phrase = phrase;
      c.terms = ids;
      c.boundary_stopword = terms_[ids.front()].stopword || terms_[ids.back()].stopword;
      candidates_.push_back(std::move(c));
    }
    Candidate& c = candidates_[it->second];
    if (std::find(c.tag_strings.begin(), c.tag_strings.end(), tags) == c.tag_strings.end()) {
      c.tag_strings.push_back(tags);
    }
    c.tf += 1.0;
  }

  const StopwordList& stopwords_;
  int n_;
  int num_sentences_ = 0;
  std::vector<Term> terms_;
  std::unordered_map<std::string, int> term_index_;
  std::map<std::pair<int, int>, double> edges_;
  std::vector<Candidate> candidates_;
  std::unordered_map<std::string, std::size_t> candidate_index_;
};

}  // namespace

void ExtractionConfig::validate() const {
  if (max_ngram < 1 || max_ngram > 3) throw InvalidArgument("max_ngram must be in [1, 3]");
  if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) {
    throw InvalidArgument("dedup_threshold must be in (0, 1]");
  }
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword list " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.insert(text::to_lower(line));
  }
  return StopwordList(std::move(words));
}

const StopwordList& StopwordList::english() {
  static const StopwordList list =
      load(std::filesystem::path(B2T_RESOURCE_DIR) / "stopwords_en.txt");
  return list;
}

std::vector<ScoredCandidate> yake_candidates(std::string_view text, const StopwordList& stopwords,
                                             int max_ngram) {
  Document doc(stopwords, max_ngram);
  doc.build(text);
  doc.score_terms();
  doc.score_candidates();
  return doc.ranked();
}

std::string join_captions(std::span<const CaptionRecord> captions) {
  std::string out;
  for (const auto& c : captions) {
    std::string s = text::collapse_whitespace(c.raw.empty() ? c.caption : c.raw);
    if (s.empty()) continue;
    char last = s.back();
    if (last != '.' && last != '!' && last != '?') s.push_back('.');
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

std::vector<Keyword> dedup_keywords(std::span<const Keyword> kws, double threshold) {
  std::vector<Keyword> kept;
  for (const Keyword& k : kws) {
    bool distinct = std::all_of(kept.begin(), kept.end(), [&](const Keyword& other) {
      return text::levenshtein_similarity(k.phrase, other.phrase) < threshold;
    });
    if (distinct) kept.push_back(k);
  }
  return kept;
}

std::vector<Keyword> extract_keywords(std::span<const CaptionRecord> captions,
                                      const ExtractionConfig& cfg, const StopwordList& stopwords) {
  cfg.validate();
  std::string doc = join_captions(captions);
  if (doc.empty()) return {};
  std::vector<ScoredCandidate> ranked = yake_candidates(doc, stopwords, cfg.max_ngram);

  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(captions.size());
  for (const auto& c : captions) tokens.push_back(text::tokenize(c.caption));

  std::vector<Keyword> out;
  for (const ScoredCandidate& cand : ranked) {
    if (out.size() == static_cast<std::size_t>(cfg.top_k)) break;
    bool distinct = std::all_of(out.begin(), out.end(), [&](const Keyword& kept) {
      return text::levenshtein_similarity(cand.phrase, kept.phrase) < cfg.dedup_threshold;
    });
    if (!distinct) continue;
    std::size_t support = 0;
    for (const auto& t : tokens) support += text::contains_phrase(t, cand.phrase) ? 1 : 0;
    out.push_back({cand.phrase, cand.score, support});
  }
  return out;
}

std::vector<Keyword> ensemble_keywords(std::span<const std::vector<Keyword>> per_captioner,
                                       EnsembleRule rule) {
  if (per_captioner.empty()) throw InvalidArgument("ensemble needs at least one keyword list");
  std::size_t lists = per_captioner.size();
  std::size_t needed = 1;
  switch (rule.mode) {
    case EnsembleRule::Mode::kUnion:
      needed = 1;
      break;
    case EnsembleRule::Mode::kIntersection:
      needed = lists;
      break;
    case EnsembleRule::Mode::kVote:
      if (rule.min_votes > lists) {
        throw InvalidArgument("vote(" + std::to_string(rule.min_votes) + ") exceeds the " +
                              std::to_string(lists) + " keyword lists");
      }
      needed = std::max<std::size_t>(rule.min_votes, 1);
      break;
  }

  struct Merged {
    Keyword kw;
    std::size_t votes = 0;
  };
  std::map<std::string, Merged> merged;
  for (const auto& list : per_captioner) {
    std::unordered_set<std::string> seen_here;
    for (const Keyword& k : list) {
      auto [it, inserted] = merged.try_emplace(k.phrase, Merged{k, 0});
      if (!inserted) {
        it->second.kw.yake_score = std::min(it->second.kw.yake_score, k.yake_score);
        it->second.kw.support = std::max(it->second.kw.support, k.support);
      }
      if (seen_here.insert(k.phrase).second) ++it->second.votes;
    }
  }
  std::vector<Keyword> out;
  for (auto& [phrase, m] : merged) {
    if (m.votes >= needed) out.push_back(m.kw);
  }
  std::stable_sort(out.begin(), out.end(), [](const Keyword& a, const Keyword& b) {
    if (a.yake_score != b.yake_score) return a.yake_score < b.yake_score;
    return a.phrase < b.phrase;
  });
  return out;
}

}  // namespace b2t
