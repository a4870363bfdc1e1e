#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "b2t/corpus_store.hpp"
#include "b2t/error.hpp"

namespace b2t {

// Raised when an encoder cannot produce an embedding for a prompt.
class MissingText : public Error {
 public:
  using Error::Error;
};

// Source of f_text: maps a prompt string to a unit-norm embedding.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::vector<float> encode(std::string_view prompt) const = 0;
  virtual std::size_t dim() const = 0;

  EmbeddingMatrix encode_all(std::span<const std::string> prompts) const;
};

// Exact-string lookup into an exported text embedding table (ids are the
// prompt strings). Rows are normalized on construction.
class LookupTextEncoder : public TextEncoder {
 public:
  explicit LookupTextEncoder(const EmbeddingFile& table);
  std::vector<float> encode(std::string_view prompt) const override;
  std::size_t dim() const override { return table_.dim(); }
  bool contains(std::string_view prompt) const;

 private:
  EmbeddingMatrix table_;
  std::unordered_map<std::string, std::size_t> row_of_;
};

// Sum of per-word vectors over the prompt's tokens, then normalized. Tokens
// missing from the table contribute nothing. Used by synthetic worlds.
class BagOfWordsEncoder : public TextEncoder {
 public:
  explicit BagOfWordsEncoder(const EmbeddingFile& word_vectors);
  std::vector<float> encode(std::string_view prompt) const override;
  std::size_t dim() const override { return words_.dim(); }

 private:
  EmbeddingMatrix words_;
  std::unordered_map<std::string, std::size_t> row_of_;
};

// Tries each encoder in turn; the first that does not throw MissingText wins.
class ChainedTextEncoder : public TextEncoder {
 public:
  explicit ChainedTextEncoder(std::vector<std::unique_ptr<TextEncoder>> encoders);
  std::vector<float> encode(std::string_view prompt) const override;
  std::size_t dim() const override;

 private:
  std::vector<std::unique_ptr<TextEncoder>> encoders_;
};

// Builds the encoder described by a manifest's text_embeddings / word_vectors.
std::unique_ptr<TextEncoder> encoder_from_manifest(const Manifest& m);

}  // namespace b2t
