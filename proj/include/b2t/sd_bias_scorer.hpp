#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "b2t/text_encoder.hpp"

namespace b2t {

// Residual-noise prediction for one (image, condition[, timestep, noise]) query.
struct ScoreTensor {
  std::vector<float> values;
  std::vector<std::size_t> shape;
  std::string condition;
  std::string image_id;
  std::optional<int> timestep;
  std::optional<std::uint64_t> noise_seed;
};

struct TimestepInterval {
  int lo = 0;
  int hi = 0;
};

struct NoiseSpec {
  // Low, mid and high noise intensities.
  std::vector<TimestepInterval> intervals = {{0, 199}, {400, 599}, {800, 999}};
  int samples_per_interval = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseSample {
  int timestep = 0;
  std::uint64_t noise_seed = 0;
};

// Uniform integer timesteps with replacement plus one noise seed per draw,
// from a splitmix64 stream seeded by spec.seed. One row per interval.
std::vector<std::vector<NoiseSample>> sample_noise_plan(const NoiseSpec& spec);

class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  // Deterministic for fixed arguments. Clean images use nullopt for both
  // timestep and noise_seed.
  virtual ScoreTensor score(const std::string& image_id, const std::string& condition,
                            std::optional<int> timestep = std::nullopt,
                            std::optional<std::uint64_t> noise_seed = std::nullopt) const = 0;
};

// Reads tensors exported by the model adapters: `<dir>/index.json` lists
// entries {image_id, condition, timestep, noise_seed, file} and a shared
// shape; every file holds prod(shape) little-endian f32 values.
class FileScoreProvider : public ScoreProvider {
 public:
  explicit FileScoreProvider(std::filesystem::path dir);
  ScoreTensor score(const std::string& image_id, const std::string& condition,
                    std::optional<int> timestep = std::nullopt,
                    std::optional<std::uint64_t> noise_seed = std::nullopt) const override;
  const std::vector<std::size_t>& shape() const { return shape_; }

 private:
  using Key = std::tuple<std::string, std::string, std::optional<int>, std::optional<std::uint64_t>>;
  std::filesystem::path dir_;
  std::vector<std::size_t> shape_;
  std::map<Key, std::string> files_;
};

void write_score_store(const std::filesystem::path& dir, std::span<const ScoreTensor> tensors);

// score(x; c, t, eps) = gain(t) * M * f_text(c) + nuisance(x, t, eps), where
// gain(t) = 1 + timestep_gain * t / 999 and the nuisance term is a seeded
// pseudo-random vector shared by every condition. With timestep_gain = 0 the
// SD score has the closed form ||M (f_text(a) - f_text(y))||.
class SyntheticLinearProvider : public ScoreProvider {
 public:
  SyntheticLinearProvider(const TextEncoder& encoder, std::vector<float> matrix, std::size_t out_dim,
                          double timestep_gain = 0.0, std::uint64_t seed = 0);
  ScoreTensor score(const std::string& image_id, const std::string& condition,
                    std::optional<int> timestep = std::nullopt,
                    std::optional<std::uint64_t> noise_seed = std::nullopt) const override;

  // M * f_text(condition) without gain or nuisance.
  std::vector<double> project(const std::string& condition) const;

 private:
  const TextEncoder& encoder_;
  std::vector<float> matrix_;  // out_dim x encoder.dim(), row-major
  std::size_t out_dim_;
  double timestep_gain_;
  std::uint64_t seed_;
};

// Mean over images of ||score(x; keyword) - score(x; prompt)||_2.
double sd_score_clean(const std::string& keyword, const std::string& prompt,
                      std::span<const std::string> image_ids, const ScoreProvider& provider);

// One value per NoiseSpec interval: the clean formula averaged over the
// sampled (timestep, noise) pairs, shared across images and conditions.
std::vector<double> sd_score_noisy(const std::string& keyword, const std::string& prompt,
                                   std::span<const std::string> image_ids,
                                   const ScoreProvider& provider, const NoiseSpec& spec);

struct SdRankEntry {
  std::string keyword;
  double score = 0.0;
};

// Ascending by clean SD score (lowest = already reflected in the images),
// ties by keyword.
std::vector<SdRankEntry> rank_sd_keywords(std::span<const std::string> candidates,
                                          const std::string& prompt,
                                          std::span<const std::string> image_ids,
                                          const ScoreProvider& provider);

}  // namespace b2t
