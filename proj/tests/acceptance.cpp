// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "b2t/clip_bias_scorer.hpp"
#include "b2t/eval_metrics.hpp"
#include "b2t/fair_guidance.hpp"
#include "b2t/keyword_miner.hpp"
#include "b2t/pipeline.hpp"
#include "b2t/sd_bias_scorer.hpp"
#include "b2t/synth_world.hpp"
#include "b2t/text_encoder.hpp"
#include "b2t/zero_shot_debiaser.hpp"

namespace {

using namespace b2t;

constexpr int kWorlds = 100;
int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

WorldSpec default_spec(std::uint64_t seed) {
  WorldSpec s;
  s.n = 2000;
  s.d = 64;
  s.minority_fraction = 0.05;
  s.bias_strength = 0.3;
  s.seed = seed;
  return s;
}

struct WorldRun {
  SynthWorld world;
  std::unique_ptr<BagOfWordsEncoder> encoder;
  std::vector<KeywordBiasEntry> target_ranking;  // class carrying the planted bias
  std::vector<KeywordBiasEntry> all_entries;     // both classes, merged
};

WorldRun discover(std::uint64_t seed) {
  WorldRun run{generate_world(default_spec(seed)), nullptr, {}, {}};
  run.encoder = std::make_unique<BagOfWordsEncoder>(run.world.word_vectors);
  ExtractionConfig cfg;
  std::vector<std::vector<KeywordBiasEntry>> reports;
  for (const auto& label : run.world.split.classes()) {
    auto kws = extract_class_keywords(run.world.split, label, cfg);
    reports.push_back(score_class_keywords(run.world.split, label, kws, *run.encoder));
    if (label == run.world.target_class()) run.target_ranking = reports.back();
  }
  run.all_entries = merge_class_reports(reports);
  return run;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

}  // namespace

int main() {
  // 1. Synthetic end-to-end discovery.
  std::vector<WorldRun> runs;
  runs.reserve(kWorlds);
  auto t0 = std::chrono::steady_clock::now();
  int top1 = 0;
  for (int s = 0; s < kWorlds; ++s) {
    runs.push_back(discover(static_cast<std::uint64_t>(s)));
    const auto& r = runs.back();
    if (!r.target_ranking.empty() && r.target_ranking.front().keyword.phrase == r.world.planted_keyword()) ++top1;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(top1 >= 95 && secs < 60.0, "synthetic end-to-end discovery",
         fmt("planted keyword ranked #1 in %.0f/100 worlds (need >= 95), %.2f s (need < 60 s)", top1, secs));

  // 2. Oracle equivalence.
  double worst_gap = 0.0;
  std::size_t compared = 0;
  for (const auto& r : runs) {
    for (const auto& e : r.target_ranking) {
      PromptedKeyword pk{e.keyword.phrase};
      double ref = oracle::clip_score(r.world, oracle::text_embedding(r.world, pk.prompt()), r.world.target_class());
      worst_gap = std::max(worst_gap, std::fabs(ref - e.clip_score));
      ++compared;
    }
  }
  std::mt19937_64 rng(20240229);
  int auroc_mismatch = 0, auroc_cases = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t n = 2 + rng() % 199;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    int levels = 1 + static_cast<int>(rng() % 50);  // few levels force ties
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % static_cast<std::uint64_t>(levels)) / 7.0;
      labels[i] = static_cast<int>(rng() % 2);
    }
    labels[0] = 1;
    labels[1] = 0;
    ++auroc_cases;
    if (auroc(scores, labels) != oracle::auroc(scores, labels)) ++auroc_mismatch;
  }
  report(worst_gap <= 1e-6 && auroc_mismatch == 0, "oracle equivalence",
         fmt("max |clip_score - double-loop oracle| = %.3g over %.0f keyword scores; AUROC mismatches %.0f/%.0f "
             "(n <= 200, exact equality)",
             worst_gap, static_cast<double>(compared), auroc_mismatch, auroc_cases));

  // 3. Bias-label AUROC.
  double min_auc = 1.0;
  for (const auto& r : runs) {
    PromptedKeyword pk{r.world.planted_keyword()};
    std::vector<float> emb = r.encoder->encode(pk.prompt());
    std::vector<double> all = bias_label_scores(r.world.split.image_embeddings(), emb);
    std::vector<double> scores;
    std::vector<int> labels;
    const auto& recs = r.world.split.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].true_class != r.world.target_class()) continue;
      scores.push_back(all[i]);
      labels.push_back(r.world.minority[i] ? 1 : 0);
    }
    min_auc = std::min(min_auc, auroc(scores, labels));
  }
  report(min_auc >= 0.95, "bias-label AUROC", fmt("minimum AUROC over 100 worlds = %.4f (need >= 0.95)", min_auc));

  // 4. SD score laws.
  {
    const auto& w = runs.front().world;
    const auto& enc = *runs.front().encoder;
    const std::size_t out_dim = 16;
    std::vector<float> m(out_dim * enc.dim());
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (float& v : m) v = normal(rng);
    SyntheticLinearProvider provider(enc, m, out_dim);
    std::vector<std::string> ids(w.minority_ids.begin(), w.minority_ids.begin() + 20);
    const std::string y = "a photo of a landbird";
    std::vector<std::string> conditions = {"ocean", "forest", "branch", "landbird ocean", "sky", y};
    bool self_zero = sd_score_clean(y, y, ids, provider) == 0.0;
    double closed_gap = 0.0, noisy_gap = 0.0;
    NoiseSpec spec;
    spec.samples_per_interval = 10;
    spec.seed = 11;
    for (const auto& a : conditions) {
      auto pa = provider.project(a), py = provider.project(y);
      double sq = 0.0;
      for (std::size_t i = 0; i < out_dim; ++i) sq += (pa[i] - py[i]) * (pa[i] - py[i]);
      double clean = sd_score_clean(a, y, ids, provider);
      closed_gap = std::max(closed_gap, std::fabs(clean - std::sqrt(sq)));
      for (double v : sd_score_noisy(a, y, ids, provider, spec)) noisy_gap = std::max(noisy_gap, std::fabs(v - clean));
    }
    auto noisy_self = sd_score_noisy(y, y, ids, provider, spec);
    self_zero = self_zero && std::all_of(noisy_self.begin(), noisy_self.end(), [](double v) { return v == 0.0; });
    report(self_zero && closed_gap <= 1e-5 && noisy_gap <= 1e-5, "SD score laws",
           std::string("s(y;y) == 0 exactly: ") + (self_zero ? "yes" : "no") +
               fmt("; max |clean - closed form| = %.3g; max |noisy - clean| = %.3g (tolerance 1e-5)",
                   closed_gap, noisy_gap));
  }

  // 5. Debias direction check.
  {
    int pos_ok = 0, neg_ok = 0;
    double min_gain = 1e9, max_neg = -1e9;
    for (const auto& r : runs) {
      PromptDesign design = world_prompt_design(r.world.spec);
      PromptSet base = build_base_prompt_set(design.debias);
      PromptBuildOptions opts;
      opts.mode = KeywordMode::kPos;
      PromptSet pos = build_prompt_set(design.debias, r.all_entries, opts);
      opts.mode = KeywordMode::kNeg;
      PromptSet neg = build_prompt_set(design.debias, r.all_entries, opts);
      double wb = evaluate_zero_shot(r.world.split, base, *r.encoder).report.worst;
      double wp = evaluate_zero_shot(r.world.split, pos, *r.encoder).report.worst;
      double wn = evaluate_zero_shot(r.world.split, neg, *r.encoder).report.worst;
      min_gain = std::min(min_gain, wp - wb);
      max_neg = std::max(max_neg, wn - wb);
      pos_ok += (wp - wb >= 0.05) ? 1 : 0;
      neg_ok += (wn <= wb) ? 1 : 0;
    }
    report(pos_ok == kWorlds && neg_ok == kWorlds, "debias direction check",
           fmt("pos >= +5 pts in %.0f/100 worlds (min gain %.1f pts); neg no better in %.0f/100 (max change %.1f pts)",
               pos_ok, 100 * min_gain, neg_ok, 100 * max_neg));
  }

  // 6. Group inference.
  {
    int perfect = 0;
    double min_f1 = 1.0;
    for (const auto& r : runs) {
      PromptDesign design = world_prompt_design(r.world.spec);
      PromptSet groups = build_group_prompt_set(*design.groups);
      std::vector<std::string> ids, truth;
      for (const auto& rec : r.world.split.records()) {
        ids.push_back(rec.id);
        truth.push_back(*rec.group);
      }
      GroupAssignment ga = infer_group_labels(r.world.split.image_embeddings(), ids, groups, *r.encoder);
      Prf1 m = prf1(ga.groups, truth, r.world.planted_keyword());
      min_f1 = std::min(min_f1, m.f1);
      perfect += m.f1 == 1.0 ? 1 : 0;
    }
    report(perfect == kWorlds, "group inference", fmt("F1 = 1 in %.0f/100 worlds (min F1 %.4f)", perfect, min_f1));
  }

  // 7. YAKE parity.
  {
    const char* corpora[] = {"blond_wrong", "waterbird_wrong", "landbird_wrong", "nurse_generated",
                             "firefighter_generated"};
    int min_overlap = 5;
    std::string detail;
    for (const char* name : corpora) {
      std::string base = std::string(B2T_FIXTURE_DIR) + "/yake/" + name;
      auto kws = extract_keywords(read_captions(base + ".jsonl"), ExtractionConfig{});
      auto golden = nlohmann::json::parse(std::ifstream(base + ".golden.json"));
      std::set<std::string> ours, ref;
      for (std::size_t k = 0; k < 5 && k < kws.size(); ++k) ours.insert(kws[k].phrase);
      for (std::size_t k = 0; k < 5 && k < golden.size(); ++k) ref.insert(golden[k]["phrase"].get<std::string>());
      int overlap = 0;
      for (const auto& p : ours) overlap += ref.contains(p) ? 1 : 0;
      min_overlap = std::min(min_overlap, overlap);
      detail += std::string(detail.empty() ? "" : ", ") + name + " " + std::to_string(overlap) + "/5";
    }
    report(min_overlap >= 4, "YAKE parity", "top-5 overlap " + detail + " (need >= 4/5 each)");
  }

  // 8. Guidance laws.
  {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<float> u(4096), p(4096), e(4096);
    for (auto* v : {&u, &p, &e}) {
      for (float& x : *v) x = normal(rng);
    }
    std::vector<float> base = cfg_base(u, p, 7.5);
    GuidanceParams zero_edit;
    zero_edit.edit_scale = 0.0;
    zero_edit.warmup_steps = 0;
    MomentumState s0;
    bool exact = fair_guidance_step(u, p, e, 1, zero_edit, s0) == base;
    GuidanceParams warm = GuidanceParams::balancing();
    MomentumState s1;
    for (int step = 0; step < warm.warmup_steps; ++step) {
      exact = exact && fair_guidance_step(u, p, e, 1, warm, s1) == base;
    }
    bool edits_after_warmup = fair_guidance_step(u, p, e, 1, warm, s1) != base;
    BalanceSimulation sim = simulate_balancing(200, 0.9, 0.1, 7);
    bool balanced = std::fabs(sim.final_ratio - 0.5) <= 0.05;
    report(exact && edits_after_warmup && balanced, "guidance laws",
           std::string("edit_scale 0 and warmup steps bit-identical to CFG: ") + (exact ? "yes" : "no") +
               fmt("; balancer ratio after 200 samples = %.3f (need 0.5 +/- 0.05)", sim.final_ratio));
  }

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
