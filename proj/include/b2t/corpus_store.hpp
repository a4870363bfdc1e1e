#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace b2t {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SampleRecord {
  std::string id;
  std::string true_class;
  std::string pred_class;
  std::optional<std::string> group;  // ground truth, evaluation only

  bool correct() const { return true_class == pred_class; }
};

struct CaptionRecord {
  std::string id;
  std::string raw;      // as exported by the captioner
  std::string caption;  // lowercased, whitespace-collapsed
};

// Row-major n x d float matrix. The `normalized` flag is a verified property:
// it is true iff every row has L2 norm within kUnitTolerance of 1.
class EmbeddingMatrix {
 public:
  static constexpr double kUnitTolerance = 1e-4;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  bool empty() const { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<float>& data() const { return data_; }

  Eigen::Map<const RowMatrixF> view() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(dim_)};
  }

  // Rows picked in the given order.
  EmbeddingMatrix select(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  bool normalized_ = false;
};

// Returns a copy whose rows have unit L2 norm. Throws InvalidArgument naming
// the first zero-norm row.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

struct EmbeddingFile {
  EmbeddingMatrix matrix;
  std::vector<std::string> ids;
};

// Binary layout: "B2TE", u32 version, u32 n, u32 d (all little-endian),
// then n*d little-endian f32 values row-major. Ids live in `<path>.ids`,
// one per line.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
EmbeddingFile read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m,
                      std::span<const std::string> ids);
std::filesystem::path id_sidecar(const std::filesystem::path& embedding_path);

std::vector<SampleRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const SampleRecord> records);
std::vector<CaptionRecord> read_captions(const std::filesystem::path& path);
void write_captions(const std::filesystem::path& path, std::span<const CaptionRecord> captions);

// id,group CSV used for group-label exports.
std::vector<std::pair<std::string, std::string>> read_group_labels(const std::filesystem::path& path);
void write_group_labels(const std::filesystem::path& path,
                        std::span<const std::pair<std::string, std::string>> labels);

// Indices into an EvaluatedSplit's records.
struct Partition {
  std::vector<std::size_t> correct;
  std::vector<std::size_t> wrong;
};

class EvaluatedSplit {
 public:
  EvaluatedSplit() = default;
  // Captions may be a subset of the records; rows of `image_embeddings` must
  // already be aligned with `records`.
  EvaluatedSplit(std::vector<SampleRecord> records, EmbeddingMatrix image_embeddings,
                 std::vector<CaptionRecord> captions);

  const std::vector<SampleRecord>& records() const { return records_; }
  const EmbeddingMatrix& image_embeddings() const { return images_; }
  std::size_t size() const { return records_.size(); }

  // Caption aligned with record i; nullptr when the record has none.
  const CaptionRecord* caption(std::size_t i) const;
  const std::vector<std::string>& caption_tokens(std::size_t i) const { return tokens_[i]; }
  std::vector<CaptionRecord> captions() const;

  std::optional<std::size_t> index_of(const std::string& id) const;

  // Classes in first-appearance order of true_class.
  std::vector<std::string> classes() const;

  Partition partition() const;
  // Partition restricted to records whose true_class equals `label`.
  Partition partition(const std::string& label) const;

 private:
  std::vector<SampleRecord> records_;
  EmbeddingMatrix images_;
  std::vector<std::optional<CaptionRecord>> captions_;
  std::vector<std::vector<std::string>> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GeneratedSet {
  std::string prompt;
  std::vector<std::string> image_ids;
  std::vector<CaptionRecord> captions;
  std::optional<std::filesystem::path> score_store;
};

// Paths are resolved against the manifest's directory.
struct Manifest {
  enum class Kind { kEvaluated, kGenerated };
  Kind kind = Kind::kEvaluated;
  std::filesystem::path path;
  std::filesystem::path captions;
  std::optional<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> image_embeddings;
  std::optional<std::filesystem::path> text_embeddings;
  std::optional<std::filesystem::path> word_vectors;
  std::optional<std::filesystem::path> score_store;
  std::string prompt;  // generated sets only
};

Manifest read_manifest(const std::filesystem::path& path);

using Corpus = std::variant<EvaluatedSplit, GeneratedSet>;

Corpus load_corpus(const std::filesystem::path& manifest_path);
EvaluatedSplit load_evaluated(const std::filesystem::path& manifest_path);
GeneratedSet load_generated(const std::filesystem::path& manifest_path);

// Writes predictions.csv, captions.jsonl, images.b2te (+ .ids) and
// manifest.json into `dir`; returns the manifest path. `extra` adds manifest
// entries (key, path relative to `dir`) for files written by the caller.
std::filesystem::path write_corpus(
    const EvaluatedSplit& split, const std::filesystem::path& dir,
    std::span<const std::pair<std::string, std::string>> extra = {});

}  // namespace b2t
