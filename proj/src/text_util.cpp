#include "b2t/text_util.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "b2t/error.hpp"

namespace b2t::text {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

constexpr std::array<std::string_view, 6> kClitics = {"'s", "'re", "'ll", "'ve", "'d", "'m"};

void push_word(std::string word, std::vector<std::string>& out) {
  std::string lower = to_lower(word);
  if (lower.size() > 3 && lower.ends_with("n't")) {
    out.push_back(word.substr(0, word.size() - 3));
    out.push_back(word.substr(word.size() - 3));
    return;
  }
  for (std::string_view clitic : kClitics) {
    if (lower.size() > clitic.size() && lower.ends_with(clitic)) {
      out.push_back(word.substr(0, word.size() - clitic.size()));
      out.push_back(word.substr(word.size() - clitic.size()));
      return;
    }
  }
  out.push_back(std::move(word));
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string collapse_whitespace(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_caption(std::string_view raw) { return to_lower(collapse_whitespace(raw)); }

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0 && static_cast<unsigned char>(c) < 128;
}

bool is_all_punct(std::string_view token) {
  return std::all_of(token.begin(), token.end(), is_ascii_punct);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c != '"') {
        cur.push_back(c);
      } else if (i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) throw InvalidArgument("unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> raw;
  for (const std::string& chunk : split_ws(text)) {
    std::size_t begin = 0;
    std::size_t end = chunk.size();
    std::vector<std::string> trailing;
    while (begin < end && is_ascii_punct(chunk[begin]) && chunk[begin] != '\'') {
      raw.emplace_back(1, chunk[begin]);
      ++begin;
    }
    while (end > begin && is_ascii_punct(chunk[end - 1])) {
      trailing.emplace_back(1, chunk[end - 1]);
      --end;
    }
    if (end > begin) push_word(chunk.substr(begin, end - begin), raw);
    raw.insert(raw.end(), trailing.rbegin(), trailing.rend());
  }
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (std::string& t : raw) {
    if (t.empty()) continue;
    if (t.front() == '\'' && t.size() > 1) continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    current.push_back(c);
    bool terminator = c == '.' || c == '!' || c == '?';
    if (terminator && (i + 1 == text.size() || is_space(text[i + 1]))) {
      std::string s = collapse_whitespace(current);
      if (!s.empty()) out.push_back(std::move(s));
      current.clear();
    }
  }
  std::string s = collapse_whitespace(current);
  if (!s.empty()) out.push_back(std::move(s));
  return out;
}

bool contains_phrase(const std::vector<std::string>& caption_tokens, std::string_view phrase) {
  std::vector<std::string> needle = split_ws(to_lower(phrase));
  if (needle.empty() || needle.size() > caption_tokens.size()) return false;
  for (std::size_t start = 0; start + needle.size() <= caption_tokens.size(); ++start) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size() && match; ++k) {
      match = to_lower(caption_tokens[start + k]) == needle[k];
    }
    if (match) return true;
  }
  return false;
}

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b = static_cast<unsigned char>(s[i]);
    char32_t cp = b;
    std::size_t extra = 0;
    if (b >= 0xF0) {
      cp = b & 0x07;
      extra = 3;
    } else if (b >= 0xE0) {
      cp = b & 0x0F;
      extra = 2;
    } else if (b >= 0xC0) {
      cp = b & 0x1F;
      extra = 1;
    }
    if (extra > 0 && i + extra >= s.size()) {
      // Truncated sequence: keep the raw byte.
      out.push_back(b);
      ++i;
      continue;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
  std::u32string ua = utf8_decode(a);
  std::u32string ub = utf8_decode(b);
  std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_distance(ua, ub)) / static_cast<double>(longest);
}

}  // namespace b2t::text
