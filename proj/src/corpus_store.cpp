#include "b2t/corpus_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "b2t/error.hpp"
#include "b2t/text_util.hpp"

namespace b2t {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', '2', 'T', 'E'};

bool rows_are_unit(const std::vector<float>& data, std::size_t rows, std::size_t dim) {
  if (rows == 0) return false;
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      double v = data[r * dim + c];
      sq += v * v;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > EmbeddingMatrix::kUnitTolerance) return false;
  }
  return true;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(path)) throw IoError("file not found: " + path.string());
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               const std::vector<std::string>& required,
                                               const std::vector<std::string>& optional) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing CSV header");
  std::vector<std::string> header = text::csv_split(line);
  bool ok = header.size() >= required.size() && header.size() <= required.size() + optional.size();
  for (std::size_t i = 0; ok && i < header.size(); ++i) {
    const std::string& want = i < required.size() ? required[i] : optional[i - required.size()];
    ok = header[i] == want;
  }
  if (!ok) {
    std::string expected;
    for (const auto& h : required) expected += (expected.empty() ? "" : ",") + h;
    for (const auto& h : optional) expected += "[," + h + "]";
    throw IoError(path.string() + ": bad CSV header, expected " + expected);
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields;
    try {
      fields = text::csv_split(line);
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (fields.size() != header.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path candidate(p);
  return candidate.is_absolute() ? candidate : base / candidate;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != rows_ * dim_) {
    throw InvalidArgument("embedding payload has " + std::to_string(data_.size()) +
                          " values, expected " + std::to_string(rows_ * dim_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw InvalidArgument("non-finite embedding value at row " + std::to_string(i / dim_));
    }
  }
  normalized_ = rows_are_unit(data_, rows_, dim_);
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t i : indices) {
    if (i >= rows_) throw InvalidArgument("row index out of range");
    auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return {indices.size(), dim_, std::move(out)};
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  std::vector<float> out(m.data());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < m.dim(); ++c) {
      double v = out[r * m.dim() + c];
      sq += v * v;
    }
    if (sq == 0.0) throw InvalidArgument("zero-norm row " + std::to_string(r));
    double norm = std::sqrt(sq);
    // Already-unit rows are left bit-identical so normalization is idempotent.
    if (std::abs(norm - 1.0) < 1e-7) continue;
    for (std::size_t c = 0; c < m.dim(); ++c) {
      out[r * m.dim() + c] = static_cast<float>(out[r * m.dim() + c] / norm);
    }
  }
  return {m.rows(), m.dim(), std::move(out)};
}

fs::path id_sidecar(const fs::path& embedding_path) {
  return fs::path(embedding_path.string() + ".ids");
}

EmbeddingFile read_embeddings(const fs::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  unsigned char header[16];
  if (!in.read(reinterpret_cast<char*>(header), 16)) {
    throw IoError(path.string() + ": truncated embedding header");
  }
  if (std::memcmp(header, kMagic, 4) != 0) throw IoError(path.string() + ": bad magic");
  std::uint32_t version = get_u32(header + 4);
  if (version != kEmbeddingFormatVersion) {
    throw IoError(path.string() + ": unsupported version " + std::to_string(version));
  }
  std::size_t n = get_u32(header + 8);
  std::size_t d = get_u32(header + 12);
  std::vector<unsigned char> payload(n * d * 4);
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
    throw IoError(path.string() + ": truncated embedding payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + ": trailing bytes after payload");
  }
  std::vector<float> values(n * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(payload.data() + 4 * i));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw IoError(path.string() + ": non-finite value at row " + std::to_string(i / d));
    }
  }

  std::vector<std::string> ids;
  std::ifstream id_in = open_in(id_sidecar(path));
  std::string line;
  while (std::getline(id_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ids.push_back(line);
  }
  // A final newline does not introduce an extra id.
  if (ids.size() == n + 1 && ids.back().empty()) ids.pop_back();
  if (ids.size() != n) {
    throw IoError(path.string() + ": row count mismatch (" + std::to_string(n) + " rows, " +
                  std::to_string(ids.size()) + " ids)");
  }
  return {EmbeddingMatrix(n, d, std::move(values)), std::move(ids)};
}

void write_embeddings(const fs::path& path, const EmbeddingMatrix& m,
                      std::span<const std::string> ids) {
  if (ids.size() != m.rows()) throw InvalidArgument("row count mismatch writing " + path.string());
  std::ofstream out = open_out(path, std::ios::binary);
  out.write(kMagic, 4);
  put_u32(out, kEmbeddingFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  std::ofstream id_out = open_out(id_sidecar(path));
  for (const auto& id : ids) {
    if (id.find('\n') != std::string::npos) throw InvalidArgument("id contains a newline: " + id);
    id_out << id << '\n';
  }
}

std::vector<SampleRecord> read_predictions(const fs::path& path) {
  auto rows = read_csv(path, {"id", "true_class", "pred_class"}, {"group"});
  std::vector<SampleRecord> records;
  records.reserve(rows.size());
  for (auto& r : rows) {
    SampleRecord rec{r[0], r[1], r[2], std::nullopt};
    if (r.size() > 3 && !r[3].empty()) rec.group = r[3];
    records.push_back(std::move(rec));
  }
  return records;
}

void write_predictions(const fs::path& path, std::span<const SampleRecord> records) {
  bool with_group = false;
  for (const auto& r : records) with_group = with_group || r.group.has_value();
  std::ofstream out = open_out(path);
  out << "id,true_class,pred_class" << (with_group ? ",group" : "") << '\n';
  for (const auto& r : records) {
    out << text::csv_escape(r.id) << ',' << text::csv_escape(r.true_class) << ',' << text::csv_escape(r.pred_class);
    if (with_group) out << ',' << text::csv_escape(r.group.value_or(""));
    out << '\n';
  }
}

std::vector<CaptionRecord> read_captions(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<CaptionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::collapse_whitespace(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("caption") ||
        !obj["id"].is_string() || !obj["caption"].is_string()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected {\"id\": str, \"caption\": str}");
    }
    std::string raw = obj["caption"].get<std::string>();
    out.push_back({obj["id"].get<std::string>(), raw, text::normalize_caption(raw)});
  }
  return out;
}

void write_captions(const fs::path& path, std::span<const CaptionRecord> captions) {
  std::ofstream out = open_out(path);
  for (const auto& c : captions) {
    json obj = {{"id", c.id}, {"caption", c.raw.empty() ? c.caption : c.raw}};
    out << obj.dump() << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> read_group_labels(const fs::path& path) {
  auto rows = read_csv(path, {"id", "group"}, {});
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.emplace_back(std::move(r[0]), std::move(r[1]));
  return out;
}

void write_group_labels(const fs::path& path,
                        std::span<const std::pair<std::string, std::string>> labels) {
  std::ofstream out = open_out(path);
  out << "id,group\n";
  for (const auto& [id, group] : labels) out << text::csv_escape(id) << ',' << text::csv_escape(group) << '\n';
}

EvaluatedSplit::EvaluatedSplit(std::vector<SampleRecord> records, EmbeddingMatrix image_embeddings,
                               std::vector<CaptionRecord> captions)
    : records_(std::move(records)), images_(std::move(image_embeddings)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(records_[i].id, i).second) {
      throw InvalidArgument("duplicate id " + records_[i].id);
    }
  }
  if (images_.rows() != records_.size()) {
    throw InvalidArgument("row count mismatch: " + std::to_string(images_.rows()) +
                          " embedding rows for " + std::to_string(records_.size()) + " records");
  }
  captions_.resize(records_.size());
  tokens_.resize(records_.size());
  for (auto& c : captions) {
    auto it = index_.find(c.id);
    if (it == index_.end()) throw InvalidArgument("id mismatch: caption for unknown id " + c.id);
    if (captions_[it->second]) throw InvalidArgument("duplicate caption for id " + c.id);
    tokens_[it->second] = text::tokenize(c.caption);
    captions_[it->second] = std::move(c);
  }
}

const CaptionRecord* EvaluatedSplit::caption(std::size_t i) const {
  return captions_[i] ? &*captions_[i] : nullptr;
}

std::vector<CaptionRecord> EvaluatedSplit::captions() const {
  std::vector<CaptionRecord> out;
  for (const auto& c : captions_) {
    if (c) out.push_back(*c);
  }
  return out;
}

std::optional<std::size_t> EvaluatedSplit::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> EvaluatedSplit::classes() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (seen.insert(r.true_class).second) out.push_back(r.true_class);
  }
  return out;
}

Partition EvaluatedSplit::partition() const {
  Partition p;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    (records_[i].correct() ? p.correct : p.wrong).push_back(i);
  }
  return p;
}

Partition EvaluatedSplit::partition(const std::string& label) const {
  Partition p;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].true_class != label) continue;
    (records_[i].correct() ? p.correct : p.wrong).push_back(i);
  }
  return p;
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("manifest not found: " + path.string());
  std::ifstream in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw IoError(path.string() + ": manifest must be a JSON object");
  static const std::unordered_set<std::string> kKeys = {
      "kind", "captions", "predictions", "image_embeddings", "text_embeddings",
      "word_vectors", "scores", "prompt"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.contains(it.key())) throw IoError(path.string() + ": unknown key '" + it.key() + "'");
    if (!it.value().is_string()) throw IoError(path.string() + ": '" + it.key() + "' must be a string");
  }
  Manifest m;
  m.path = path;
  fs::path base = path.parent_path();
  std::string kind = j.value("kind", "evaluated");
  if (kind == "evaluated") {
    m.kind = Manifest::Kind::kEvaluated;
  } else if (kind == "generated") {
    m.kind = Manifest::Kind::kGenerated;
  } else {
    throw IoError(path.string() + ": kind must be 'evaluated' or 'generated'");
  }
  if (!j.contains("captions")) throw IoError(path.string() + ": missing 'captions'");
  m.captions = resolve(base, j["captions"]);
  auto opt = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key)) return std::nullopt;
    return resolve(base, j[key]);
  };
  m.predictions = opt("predictions");
  m.image_embeddings = opt("image_embeddings");
  m.text_embeddings = opt("text_embeddings");
  m.word_vectors = opt("word_vectors");
  m.score_store = opt("scores");
  m.prompt = j.value("prompt", "");
  if (m.kind == Manifest::Kind::kEvaluated) {
    if (!m.predictions) throw IoError(path.string() + ": missing 'predictions'");
    if (!m.image_embeddings) throw IoError(path.string() + ": missing 'image_embeddings'");
  } else if (m.prompt.empty()) {
    throw IoError(path.string() + ": generated manifest needs 'prompt'");
  }
  return m;
}

EvaluatedSplit load_evaluated(const fs::path& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  if (m.kind != Manifest::Kind::kEvaluated) {
    throw IoError(manifest_path.string() + ": not an evaluated split");
  }
  std::vector<SampleRecord> records = read_predictions(*m.predictions);
  std::vector<CaptionRecord> captions = read_captions(m.captions);
  EmbeddingFile emb = read_embeddings(*m.image_embeddings);
  if (emb.matrix.rows() != records.size()) {
    throw IoError("row count mismatch: " + std::to_string(emb.matrix.rows()) +
                  " embedding rows for " + std::to_string(records.size()) + " records");
  }
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < emb.ids.size(); ++i) {
    if (!row_of.emplace(emb.ids[i], i).second) throw IoError("duplicate embedding id " + emb.ids[i]);
  }
  std::vector<std::size_t> order;
  order.reserve(records.size());
  for (const auto& r : records) {
    auto it = row_of.find(r.id);
    if (it == row_of.end()) throw IoError("id mismatch: no embedding for record " + r.id);
    order.push_back(it->second);
  }
  try {
    return EvaluatedSplit(std::move(records), normalize_rows(emb.matrix.select(order)), std::move(captions));
  } catch (const InvalidArgument& e) {
    throw IoError(e.what());
  }
}

GeneratedSet load_generated(const fs::path& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  if (m.kind != Manifest::Kind::kGenerated) {
    throw IoError(manifest_path.string() + ": not a generated set");
  }
  GeneratedSet g;
  g.prompt = m.prompt;
  g.captions = read_captions(m.captions);
  std::unordered_set<std::string> seen;
  for (const auto& c : g.captions) {
    if (!seen.insert(c.id).second) throw IoError("duplicate caption id " + c.id);
    g.image_ids.push_back(c.id);
  }
  g.score_store = m.score_store;
  return g;
}

Corpus load_corpus(const fs::path& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  if (m.kind == Manifest::Kind::kGenerated) return load_generated(manifest_path);
  return load_evaluated(manifest_path);
}

fs::path write_corpus(const EvaluatedSplit& split, const fs::path& dir,
                      std::span<const std::pair<std::string, std::string>> extra) {
  fs::create_directories(dir);
  write_predictions(dir / "predictions.csv", split.records());
  write_captions(dir / "captions.jsonl", split.captions());
  std::vector<std::string> ids;
  ids.reserve(split.size());
  for (const auto& r : split.records()) ids.push_back(r.id);
  write_embeddings(dir / "images.b2te", split.image_embeddings(), ids);
  json manifest = {{"kind", "evaluated"},
                   {"predictions", "predictions.csv"},
                   {"captions", "captions.jsonl"},
                   {"image_embeddings", "images.b2te"}};
  for (const auto& [key, value] : extra) manifest[key] = value;
  fs::path manifest_path = dir / "manifest.json";
  std::ofstream out = open_out(manifest_path);
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

}  // namespace b2t
