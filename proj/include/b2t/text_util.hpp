#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace b2t::text {

// ASCII lowercase; bytes outside ASCII are left untouched.
std::string to_lower(std::string_view s);

// Lowercases and collapses every run of whitespace into one space; trims both ends.
std::string normalize_caption(std::string_view raw);

// Collapses whitespace without touching case.
std::string collapse_whitespace(std::string_view raw);

bool is_ascii_punct(char c);
bool is_all_punct(std::string_view token);

// Splits text into word and punctuation tokens. Leading and trailing
// punctuation become separate one-character tokens, internal punctuation
// (well-known, u.s.a) stays in the word, and English clitics ('s, n't, 're,
// ...) are split off. Tokens beginning with an apostrophe are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Splits text into sentences ending at '.', '!' or '?' followed by whitespace
// or end of input. Empty sentences are skipped.
std::vector<std::string> split_sentences(std::string_view text);

// True when the whitespace-separated tokens of `phrase` occur contiguously in
// `caption_tokens`. Both sides are compared case-insensitively.
bool contains_phrase(const std::vector<std::string>& caption_tokens, std::string_view phrase);

std::vector<std::string> split_ws(std::string_view s);

// One RFC 4180 record (no embedded newlines). Throws InvalidArgument on an
// unterminated quote.
std::vector<std::string> csv_split(std::string_view line);
// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

std::u32string utf8_decode(std::string_view s);

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b);

// 1 - distance / max(len). Two empty strings are identical (1.0).
double levenshtein_similarity(std::string_view a, std::string_view b);

}  // namespace b2t::text
