#include "b2t/sd_bias_scorer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "b2t/error.hpp"

namespace b2t {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

double l2_distance(const ScoreTensor& a, const ScoreTensor& b) {
  if (a.shape != b.shape || a.values.size() != b.values.size()) {
    throw InvalidArgument("score tensor shape mismatch for image " + a.image_id);
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
    sq += d * d;
  }
  return std::sqrt(sq);
}

// Checks that every tensor of one query batch shares the first tensor's shape.
class ShapeGuard {
 public:
  void check(const ScoreTensor& t) {
    if (!shape_) {
      shape_ = t.shape;
    } else if (*shape_ != t.shape) {
      throw InvalidArgument("score tensor shape mismatch for image " + t.image_id);
    }
  }

 private:
  std::optional<std::vector<std::size_t>> shape_;
};

}  // namespace

void NoiseSpec::validate() const {
  if (samples_per_interval < 1) throw InvalidArgument("samples_per_interval must be >= 1");
  if (intervals.empty()) throw InvalidArgument("noise spec needs at least one interval");
  for (const auto& iv : intervals) {
    if (!(0 <= iv.lo && iv.lo <= iv.hi && iv.hi <= 999)) {
      throw InvalidArgument("timestep interval [" + std::to_string(iv.lo) + ", " +
                            std::to_string(iv.hi) + "] outside 0 <= lo <= hi <= 999");
    }
  }
}

std::vector<std::vector<NoiseSample>> sample_noise_plan(const NoiseSpec& spec) {
  spec.validate();
  std::uint64_t state = spec.seed;
  std::vector<std::vector<NoiseSample>> plan;
  for (const auto& iv : spec.intervals) {
    std::vector<NoiseSample> row;
    auto width = static_cast<std::uint64_t>(iv.hi - iv.lo + 1);
    for (int s = 0; s < spec.samples_per_interval; ++s) {
      int t = iv.lo + static_cast<int>(splitmix64(state) % width);
      row.push_back({t, splitmix64(state)});
    }
    plan.push_back(std::move(row));
  }
  return plan;
}

FileScoreProvider::FileScoreProvider(fs::path dir) : dir_(std::move(dir)) {
  fs::path index_path = dir_ / "index.json";
  std::ifstream in(index_path);
  if (!in) throw IoError("score index not found: " + index_path.string());
  json index;
  try {
    index = json::parse(in);
    shape_ = index.at("shape").get<std::vector<std::size_t>>();
    for (const auto& e : index.at("entries")) {
      std::optional<int> t;
      std::optional<std::uint64_t> seed;
      if (e.contains("timestep") && !e["timestep"].is_null()) t = e["timestep"].get<int>();
      if (e.contains("noise_seed") && !e["noise_seed"].is_null()) {
        seed = e["noise_seed"].get<std::uint64_t>();
      }
      Key key{e.at("image_id").get<std::string>(), e.at("condition").get<std::string>(), t, seed};
      if (!files_.emplace(std::move(key), e.at("file").get<std::string>()).second) {
        throw IoError(index_path.string() + ": duplicate entry");
      }
    }
  } catch (const json::exception& e) {
    throw IoError(index_path.string() + ": " + e.what());
  }
}

ScoreTensor FileScoreProvider::score(const std::string& image_id, const std::string& condition,
                                     std::optional<int> timestep,
                                     std::optional<std::uint64_t> noise_seed) const {
  auto it = files_.find(Key{image_id, condition, timestep, noise_seed});
  if (it == files_.end()) {
    throw IoError("missing score tensor for image '" + image_id + "' condition '" + condition + "'" +
                  (timestep ? " t=" + std::to_string(*timestep) : std::string()));
  }
  fs::path file = dir_ / it->second;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open score tensor " + file.string());
  std::size_t n = element_count(shape_);
  std::vector<unsigned char> raw(n * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())) ||
      in.peek() != std::char_traits<char>::eof()) {
    throw IoError("score tensor size mismatch in " + file.string());
  }
  ScoreTensor t{{}, shape_, condition, image_id, timestep, noise_seed};
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                         (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                         (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                         (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    t.values[i] = std::bit_cast<float>(bits);
    if (!std::isfinite(t.values[i])) throw IoError("non-finite value in " + file.string());
  }
  return t;
}

void write_score_store(const fs::path& dir, std::span<const ScoreTensor> tensors) {
  if (tensors.empty()) throw InvalidArgument("score store needs at least one tensor");
  fs::create_directories(dir / "blobs");
  json entries = json::array();
  const auto& shape = tensors.front().shape;
  for (const auto& t : tensors) {
    if (t.shape != shape || t.values.size() != element_count(shape)) {
      throw InvalidArgument("score tensor shape mismatch for image " + t.image_id);
    }
    std::string name = hex64(fnv1a(t.image_id)) + "_" + hex64(fnv1a(t.condition)) + "_t" +
                       (t.timestep ? std::to_string(*t.timestep) : "c") + "_s" +
                       (t.noise_seed ? hex64(*t.noise_seed) : "c") + ".f32";
    fs::path rel = fs::path("blobs") / name;
    std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / rel).string());
    for (float v : t.values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      char b[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                   static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
      out.write(b, 4);
    }
    json e = {{"image_id", t.image_id}, {"condition", t.condition}, {"file", rel.generic_string()}};
    e["timestep"] = t.timestep ? json(*t.timestep) : json(nullptr);
    e["noise_seed"] = t.noise_seed ? json(*t.noise_seed) : json(nullptr);
    entries.push_back(std::move(e));
  }
  json index = {{"format", "b2t-scores"}, {"version", 1}, {"shape", shape}, {"entries", entries}};
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "index.json").string());
  out << index.dump(1) << '\n';
}

SyntheticLinearProvider::SyntheticLinearProvider(const TextEncoder& encoder, std::vector<float> matrix,
                                                 std::size_t out_dim, double timestep_gain,
                                                 std::uint64_t seed)
    : encoder_(encoder),
      matrix_(std::move(matrix)),
      out_dim_(out_dim),
      timestep_gain_(timestep_gain),
      seed_(seed) {
  if (matrix_.size() != out_dim_ * encoder_.dim()) {
    throw InvalidArgument("projection matrix must be out_dim x text dim");
  }
}

std::vector<double> SyntheticLinearProvider::project(const std::string& condition) const {
  std::vector<float> e = encoder_.encode(condition);
  std::size_t d = e.size();
  std::vector<double> out(out_dim_, 0.0);
  for (std::size_t r = 0; r < out_dim_; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += static_cast<double>(matrix_[r * d + c]) * e[c];
    out[r] = acc;
  }
  return out;
}

ScoreTensor SyntheticLinearProvider::score(const std::string& image_id, const std::string& condition,
                                           std::optional<int> timestep,
                                           std::optional<std::uint64_t> noise_seed) const {
  std::vector<double> proj = project(condition);
  double gain = 1.0 + timestep_gain_ * static_cast<double>(timestep.value_or(0)) / 999.0;
  std::uint64_t state = fnv1a(image_id, seed_ ^ 0x5851F42D4C957F2DULL);
  state ^= static_cast<std::uint64_t>(timestep.value_or(-1)) * 0x9E3779B97F4A7C15ULL;
  state ^= noise_seed.value_or(0);
  ScoreTensor t{{}, {out_dim_}, condition, image_id, timestep, noise_seed};
  t.values.resize(out_dim_);
  for (std::size_t i = 0; i < out_dim_; ++i) {
    double nuisance = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
    t.values[i] = static_cast<float>(gain * proj[i] + nuisance);
  }
  return t;
}

double sd_score_clean(const std::string& keyword, const std::string& prompt,
                      std::span<const std::string> image_ids, const ScoreProvider& provider) {
  if (image_ids.empty()) throw InvalidArgument("generated set is empty");
  ShapeGuard guard;
  double total = 0.0;
  for (const auto& id : image_ids) {
    ScoreTensor a = provider.score(id, keyword);
    ScoreTensor y = provider.score(id, prompt);
    guard.check(a);
    guard.check(y);
    total += l2_distance(a, y);
  }
  return total / static_cast<double>(image_ids.size());
}

std::vector<double> sd_score_noisy(const std::string& keyword, const std::string& prompt,
                                   std::span<const std::string> image_ids,
                                   const ScoreProvider& provider, const NoiseSpec& spec) {
  if (image_ids.empty()) throw InvalidArgument("generated set is empty");
  auto plan = sample_noise_plan(spec);
  ShapeGuard guard;
  std::vector<double> out;
  for (const auto& samples : plan) {
    double over_images = 0.0;
    for (const auto& id : image_ids) {
      double expectation = 0.0;
      for (const auto& s : samples) {
        ScoreTensor a = provider.score(id, keyword, s.timestep, s.noise_seed);
        ScoreTensor y = provider.score(id, prompt, s.timestep, s.noise_seed);
        guard.check(a);
        guard.check(y);
        expectation += l2_distance(a, y);
      }
      over_images += expectation / static_cast<double>(samples.size());
    }
    out.push_back(over_images / static_cast<double>(image_ids.size()));
  }
  return out;
}

std::vector<SdRankEntry> rank_sd_keywords(std::span<const std::string> candidates,
                                          const std::string& prompt,
                                          std::span<const std::string> image_ids,
                                          const ScoreProvider& provider) {
  std::vector<SdRankEntry> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back({c, sd_score_clean(c, prompt, image_ids, provider)});
  std::stable_sort(out.begin(), out.end(), [](const SdRankEntry& a, const SdRankEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.keyword < b.keyword;
  });
  return out;
}

}  // namespace b2t
