#include "b2t/text_encoder.hpp"

#include <cmath>

#include "b2t/text_util.hpp"

namespace b2t {

EmbeddingMatrix TextEncoder::encode_all(std::span<const std::string> prompts) const {
  std::vector<float> data;
  data.reserve(prompts.size() * dim());
  for (const auto& p : prompts) {
    std::vector<float> v = encode(p);
    data.insert(data.end(), v.begin(), v.end());
  }
  return {prompts.size(), dim(), std::move(data)};
}

LookupTextEncoder::LookupTextEncoder(const EmbeddingFile& table)
    : table_(normalize_rows(table.matrix)) {
  for (std::size_t i = 0; i < table.ids.size(); ++i) row_of_.emplace(table.ids[i], i);
}

bool LookupTextEncoder::contains(std::string_view prompt) const {
  return row_of_.contains(std::string(prompt)) ||
         row_of_.contains(text::collapse_whitespace(prompt));
}

std::vector<float> LookupTextEncoder::encode(std::string_view prompt) const {
  auto it = row_of_.find(std::string(prompt));
  if (it == row_of_.end()) it = row_of_.find(text::collapse_whitespace(prompt));
  if (it == row_of_.end()) throw MissingText("no text embedding for prompt '" + std::string(prompt) + "'");
  auto r = table_.row(it->second);
  return {r.begin(), r.end()};
}

BagOfWordsEncoder::BagOfWordsEncoder(const EmbeddingFile& word_vectors) : words_(word_vectors.matrix) {
  for (std::size_t i = 0; i < word_vectors.ids.size(); ++i) {
    row_of_.emplace(text::to_lower(word_vectors.ids[i]), i);
  }
}

std::vector<float> BagOfWordsEncoder::encode(std::string_view prompt) const {
  std::vector<double> sum(words_.dim(), 0.0);
  bool any = false;
  for (const std::string& tok : text::tokenize(text::to_lower(prompt))) {
    auto it = row_of_.find(tok);
    if (it == row_of_.end()) continue;
    any = true;
    auto r = words_.row(it->second);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += r[c];
  }
  if (!any) throw MissingText("no known word in prompt '" + std::string(prompt) + "'");
  double sq = 0.0;
  for (double v : sum) sq += v * v;
  if (sq == 0.0) throw MissingText("prompt '" + std::string(prompt) + "' encodes to the zero vector");
  double norm = std::sqrt(sq);
  std::vector<float> out(sum.size());
  for (std::size_t c = 0; c < sum.size(); ++c) out[c] = static_cast<float>(sum[c] / norm);
  return out;
}

ChainedTextEncoder::ChainedTextEncoder(std::vector<std::unique_ptr<TextEncoder>> encoders)
    : encoders_(std::move(encoders)) {
  if (encoders_.empty()) throw InvalidArgument("chained encoder needs at least one encoder");
  for (const auto& e : encoders_) {
    if (e->dim() != encoders_.front()->dim()) throw InvalidArgument("text encoder dimensions differ");
  }
}

std::vector<float> ChainedTextEncoder::encode(std::string_view prompt) const {
  for (std::size_t i = 0; i + 1 < encoders_.size(); ++i) {
    try {
      return encoders_[i]->encode(prompt);
    } catch (const MissingText&) {
    }
  }
  return encoders_.back()->encode(prompt);
}

std::size_t ChainedTextEncoder::dim() const { return encoders_.front()->dim(); }

std::unique_ptr<TextEncoder> encoder_from_manifest(const Manifest& m) {
  std::vector<std::unique_ptr<TextEncoder>> chain;
  if (m.text_embeddings) {
    chain.push_back(std::make_unique<LookupTextEncoder>(read_embeddings(*m.text_embeddings)));
  }
  if (m.word_vectors) {
    chain.push_back(std::make_unique<BagOfWordsEncoder>(read_embeddings(*m.word_vectors)));
  }
  if (chain.empty()) {
    throw IoError(m.path.string() + ": needs 'text_embeddings' or 'word_vectors' for text prompts");
  }
  if (chain.size() == 1) return std::move(chain.front());
  return std::make_unique<ChainedTextEncoder>(std::move(chain));
}

}  // namespace b2t
