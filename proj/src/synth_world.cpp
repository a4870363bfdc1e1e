#include "b2t/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>

#include "b2t/error.hpp"

namespace b2t {

namespace fs = std::filesystem;

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

Vec unit(Vec v) {
  double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
  return v;
}

// k orthonormal directions from Gaussian draws by modified Gram-Schmidt.
std::vector<Vec> orthonormal(std::size_t k, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> basis;
  while (basis.size() < k) {
    Vec v(d);
    for (double& x : v) x = normal(rng);
    for (const auto& b : basis) axpy(-dot(v, b), b, v);
    if (std::sqrt(dot(v, v)) < 1e-6) continue;
    basis.push_back(unit(std::move(v)));
  }
  return basis;
}

Vec noisy(const Vec& v, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sigma / std::sqrt(static_cast<double>(v.size())));
  Vec out = v;
  for (double& x : out) x += normal(rng);
  return out;
}

// Raises the component along unit `g` so that cos(x, g) >= delta, keeping the
// orthogonal part. Returns a unit vector.
Vec enforce_alignment(const Vec& x, const Vec& g, double delta) {
  double a = dot(x, g);
  Vec r = x;
  axpy(-a, g, r);
  double rn = std::sqrt(dot(r, r));
  double need = delta * rn / std::sqrt(1.0 - delta * delta);
  Vec out = r;
  axpy(need * (1.0 + 1e-6) + 1e-12, g, out);
  return unit(std::move(out));
}

}  // namespace

void WorldSpec::validate() const {
  if (!(minority_fraction > 0.0 && minority_fraction < 0.5)) {
    throw InvalidArgument("minority_fraction must lie in (0, 0.5)");
  }
  if (!(bias_strength > 0.0 && bias_strength < 1.0)) throw InvalidArgument("bias_strength must lie in (0, 1)");
  if (n < 4) throw InvalidArgument("a world needs at least 4 samples");
  if (d < 5 + vocab.decoys.size()) throw InvalidArgument("dimension too small for the vocabulary");
  if (static_cast<std::size_t>(std::llround(static_cast<double>(n) * minority_fraction)) < 1) {
    throw InvalidArgument("minority group would be empty");
  }
  for (double p : {p_wrong_minority, p_wrong_majority, decoy_prob, mention_minority, mention_majority}) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("probabilities must lie in [0, 1]");
  }
  std::set<std::string> words = {vocab.class_a, vocab.class_b, vocab.bias_word, vocab.majority_word};
  words.insert(vocab.decoys.begin(), vocab.decoys.end());
  words.insert(vocab.filler.begin(), vocab.filler.end());
  if (words.size() != 4 + vocab.decoys.size() + vocab.filler.size()) {
    throw InvalidArgument("vocabulary words must be distinct");
  }
}

SynthWorld generate_world(const WorldSpec& spec) {
  spec.validate();
  const std::size_t d = spec.d;
  const auto& vocab = spec.vocab;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<Vec> basis = orthonormal(5 + vocab.decoys.size(), d, rng);
  const Vec &ca = basis[0], &cb = basis[1], &g = basis[2], &m = basis[3], &f = basis[4];

  const std::size_t n_a = spec.n / 2;
  const auto n_min = static_cast<std::size_t>(std::llround(static_cast<double>(spec.n) * spec.minority_fraction));

  SynthWorld w;
  w.spec = spec;
  w.minority.assign(spec.n, false);
  std::vector<SampleRecord> records;
  std::vector<CaptionRecord> captions;
  std::vector<float> data;
  data.reserve(spec.n * d);
  std::uniform_int_distribution<std::size_t> pick_decoy(0, vocab.decoys.size() - 1);

  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool class_a = i < n_a;
    const bool minority = class_a && i < n_min;
    const bool has_bias = !class_a || minority;
    Vec v = class_a ? ca : cb;
    axpy(spec.attribute_gain, has_bias ? g : m, v);
    std::optional<std::size_t> decoy;
    if (!vocab.decoys.empty() && unif(rng) < spec.decoy_prob) {
      decoy = pick_decoy(rng);
      axpy(spec.decoy_strength, basis[5 + *decoy], v);
    }
    Vec x = unit(noisy(v, spec.noise_sigma, rng));
    if (minority && dot(x, g) < spec.bias_strength) x = enforce_alignment(x, g, spec.bias_strength);
    for (double c : x) data.push_back(static_cast<float>(c));

    const bool wrong = unif(rng) < (minority ? spec.p_wrong_minority : spec.p_wrong_majority);
    char id[32];
    std::snprintf(id, sizeof(id), "img%05zu", i);
    const std::string& truth = class_a ? vocab.class_a : vocab.class_b;
    const std::string& other = class_a ? vocab.class_b : vocab.class_a;
    records.push_back({id, truth, wrong ? other : truth, has_bias ? vocab.bias_word : vocab.majority_word});

    std::string caption = "a photo of a " + truth;
    if (unif(rng) < (minority ? spec.mention_minority : spec.mention_majority)) {
      caption += " in the " + vocab.bias_word;
    }
    if (class_a && !minority && unif(rng) < spec.mention_minority) caption += " in the " + vocab.majority_word;
    if (decoy && unif(rng) < spec.mention_minority) caption += " with a " + vocab.decoys[*decoy];
    caption += ".";
    captions.push_back({id, caption, caption});
    if (minority) {
      w.minority[i] = true;
      w.minority_ids.push_back(id);
    }
  }
  w.split = EvaluatedSplit(std::move(records), EmbeddingMatrix(spec.n, d, std::move(data)), std::move(captions));

  std::vector<std::pair<std::string, Vec>> words;
  auto text_word = [&](const std::string& word, Vec v) { words.emplace_back(word, noisy(v, spec.text_noise, rng)); };
  Vec a_word = ca;
  axpy(spec.class_word_attribute, m, a_word);
  Vec b_word = cb;
  axpy(spec.class_word_attribute, g, b_word);
  text_word(vocab.class_a, a_word);
  text_word(vocab.class_b, b_word);
  text_word(vocab.bias_word, g);
  text_word(vocab.majority_word, m);
  for (std::size_t j = 0; j < vocab.decoys.size(); ++j) text_word(vocab.decoys[j], basis[5 + j]);
  // "a photo of a" holds four filler tokens.
  Vec filler(d, 0.0);
  axpy(spec.filler_weight / 4.0, f, filler);
  for (const auto& word : vocab.filler) words.emplace_back(word, filler);

  std::vector<float> wv;
  for (const auto& [word, v] : words) {
    w.word_vectors.ids.push_back(word);
    for (double c : v) wv.push_back(static_cast<float>(c));
  }
  w.word_vectors.matrix = EmbeddingMatrix(words.size(), d, std::move(wv));
  return w;
}

PromptDesign world_prompt_design(const WorldSpec& spec) {
  const auto& v = spec.vocab;
  PromptDesign design;
  design.debias.templates = {"[class name]", "[class name] [keyword]"};
  design.debias.class_names = {{v.class_a, {v.class_a}}, {v.class_b, {v.class_b}}};
  design.groups = GroupDesign{{"[group name]"}, {{v.bias_word, {v.bias_word}}, {v.majority_word, {v.majority_word}}}};
  return design;
}

fs::path write_world(const SynthWorld& world, const fs::path& dir) {
  fs::create_directories(dir);
  write_embeddings(dir / "word_vectors.b2te", world.word_vectors.matrix, world.word_vectors.ids);
  write_prompt_design(dir / "prompts.json", world_prompt_design(world.spec));
  const std::pair<std::string, std::string> extra[] = {{"word_vectors", "word_vectors.b2te"}};
  return write_corpus(world.split, dir, extra);
}

namespace oracle {

std::vector<double> text_embedding(const SynthWorld& world, const std::string& prompt) {
  const auto& wv = world.word_vectors;
  std::vector<double> out(wv.matrix.dim(), 0.0);
  std::string token;
  auto flush = [&] {
    while (!token.empty() && token.back() == '.') token.pop_back();
    for (std::size_t r = 0; r < wv.ids.size(); ++r) {
      if (wv.ids[r] != token) continue;
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += wv.matrix.data()[r * out.size() + k];
    }
    token.clear();
  };
  for (char c : prompt) {
    if (c == ' ') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

double sim(const SynthWorld& world, const std::vector<double>& word, const std::vector<std::size_t>& rows) {
  const auto& images = world.split.image_embeddings();
  const std::size_t d = images.dim();
  double word_norm = 0.0;
  for (std::size_t k = 0; k < d; ++k) word_norm += word[k] * word[k];
  word_norm = std::sqrt(word_norm);
  double total = 0.0;
  for (std::size_t r : rows) {
    double dp = 0.0, img_norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double x = images.data()[r * d + k];
      dp += x * word[k];
      img_norm += x * x;
    }
    total += dp / (std::sqrt(img_norm) * word_norm);
  }
  return total / static_cast<double>(rows.size());
}

double clip_score(const SynthWorld& world, const std::vector<double>& word, const std::string& label) {
  std::vector<std::size_t> wrong, correct;
  const auto& records = world.split.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].true_class != label) continue;
    if (records[i].pred_class == records[i].true_class) {
      correct.push_back(i);
    } else {
      wrong.push_back(i);
    }
  }
  return sim(world, word, wrong) - sim(world, word, correct);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  double hits = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        hits += 1.0;
      } else if (scores[i] == scores[j]) {
        hits += 0.5;
      }
    }
  }
  return hits / pairs;
}

}  // namespace oracle

}  // namespace b2t
