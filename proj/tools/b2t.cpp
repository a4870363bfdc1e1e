// b2t: command-line front end for bias keyword discovery and debiasing.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "b2t/clip_bias_scorer.hpp"
#include "b2t/corpus_store.hpp"
#include "b2t/error.hpp"
#include "b2t/eval_metrics.hpp"
#include "b2t/fair_guidance.hpp"
#include "b2t/keyword_miner.hpp"
#include "b2t/pipeline.hpp"
#include "b2t/sd_bias_scorer.hpp"
#include "b2t/synth_world.hpp"
#include "b2t/text_encoder.hpp"
#include "b2t/text_util.hpp"
#include "b2t/zero_shot_debiaser.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace b2t;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

// Raised for missing required inputs that are a usage problem, not a data problem.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::string manifest;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

const std::string& need_manifest(const Globals& g) {
  if (g.manifest.empty()) throw UsageError("--manifest is required");
  if (!fs::exists(g.manifest)) throw IoError("manifest not found: " + g.manifest);
  return g.manifest;
}

std::uint64_t need_seed(const Globals& g, const char* command) {
  if (!g.seed) throw UsageError(std::string("--seed is required for ") + command);
  return *g.seed;
}

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json keywords_to_json(const std::vector<Keyword>& kws) {
  json arr = json::array();
  for (const auto& k : kws) arr.push_back({{"phrase", k.phrase}, {"yake_score", k.yake_score}, {"support", k.support}});
  return arr;
}

std::vector<Keyword> keywords_from_json(const json& arr) {
  std::vector<Keyword> out;
  for (const auto& k : arr) {
    out.push_back({k.at("phrase").get<std::string>(), k.value("yake_score", 0.0), k.value("support", std::size_t{0})});
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string safe_name(const std::string& label) {
  std::string s;
  for (char c : label) s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return s;
}

std::vector<std::string> general_templates(const std::string& spec) {
  if (spec == "plain") return kPlainGeneralTemplate;
  if (spec == "imagenet80") return read_general_templates(resource_path("templates/imagenet80.txt"));
  return read_general_templates(spec);
}

PromptDesign load_design(const std::string& spec) {
  if (spec == "waterbirds" || spec == "celeba") return read_prompt_design(resource_path("prompts/" + spec + ".json"));
  return read_prompt_design(spec);
}

EnsembleRule parse_rule(const std::string& s) {
  if (s == "union") return EnsembleRule::union_of();
  if (s == "intersection") return EnsembleRule::intersection();
  if (s.rfind("vote:", 0) == 0) return EnsembleRule::vote(std::stoul(s.substr(5)));
  throw UsageError("--ensemble must be union, intersection or vote:K");
}

// ---- extract ---------------------------------------------------------------

struct ExtractOpts {
  std::optional<int> max_ngram;
  int top_k = 20;
  double dedup = 0.9;
  std::string stopwords;
  std::vector<std::string> labels;
  std::vector<std::string> extra_captions;
  std::string ensemble = "union";
};

std::vector<Keyword> extract_with_ensemble(std::vector<CaptionRecord> primary, const ExtractOpts& o,
                                           const ExtractionConfig& cfg, const StopwordList& sw,
                                           const std::vector<std::vector<CaptionRecord>>& extra) {
  std::vector<std::vector<Keyword>> lists{extract_keywords(primary, cfg, sw)};
  if (extra.empty()) return lists.front();
  std::unordered_set<std::string> ids;
  for (const auto& c : primary) ids.insert(c.id);
  for (const auto& file : extra) {
    std::vector<CaptionRecord> subset;
    for (const auto& c : file) {
      if (ids.contains(c.id)) subset.push_back(c);
    }
    lists.push_back(extract_keywords(subset, cfg, sw));
  }
  auto merged = ensemble_keywords(lists, parse_rule(o.ensemble));
  if (merged.size() > static_cast<std::size_t>(cfg.top_k)) merged.resize(static_cast<std::size_t>(cfg.top_k));
  return merged;
}

int cmd_extract(const Globals& g, const ExtractOpts& o) {
  const std::string& mpath = need_manifest(g);
  Manifest m = read_manifest(mpath);
  ExtractionConfig cfg;
  cfg.max_ngram = o.max_ngram.value_or(m.kind == Manifest::Kind::kGenerated ? 1 : 3);
  cfg.top_k = o.top_k;
  cfg.dedup_threshold = o.dedup;
  cfg.validate();
  StopwordList custom;
  if (!o.stopwords.empty()) custom = StopwordList::load(o.stopwords);
  const StopwordList& sw = o.stopwords.empty() ? StopwordList::english() : custom;
  std::vector<std::vector<CaptionRecord>> extra;
  for (const auto& p : o.extra_captions) extra.push_back(read_captions(p));

  json out = json::object();
  if (m.kind == Manifest::Kind::kGenerated) {
    GeneratedSet gen = load_generated(mpath);
    out[gen.prompt] = keywords_to_json(extract_with_ensemble(gen.captions, o, cfg, sw, extra));
  } else {
    EvaluatedSplit split = load_evaluated(mpath);
    std::vector<std::string> labels = o.labels.empty() ? split.classes() : o.labels;
    for (const auto& label : labels) {
      out[label] = keywords_to_json(extract_with_ensemble(wrong_captions(split, label), o, cfg, sw, extra));
    }
  }
  fs::path path = out_dir(g) / "keywords.json";
  write_json(path, out);
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// ---- score-clip ------------------------------------------------------------

struct ScoreClipOpts {
  std::string keywords;
  std::string prompt_template{kDefaultKeywordTemplate};
  std::vector<std::string> labels;
};

int cmd_score_clip(const Globals& g, const ScoreClipOpts& o) {
  const std::string& mpath = need_manifest(g);
  EvaluatedSplit split = load_evaluated(mpath);
  auto encoder = encoder_from_manifest(read_manifest(mpath));
  std::optional<json> kw_json;
  if (!o.keywords.empty()) kw_json = read_json(o.keywords);
  std::vector<std::string> labels = o.labels;
  if (labels.empty()) {
    if (kw_json) {
      for (auto it = kw_json->begin(); it != kw_json->end(); ++it) labels.push_back(it.key());
    } else {
      labels = split.classes();
    }
  }
  fs::path dir = out_dir(g);
  for (const auto& label : labels) {
    std::vector<Keyword> kws;
    if (kw_json) {
      if (!kw_json->contains(label)) throw InvalidArgument("keywords file has no class '" + label + "'");
      kws = keywords_from_json((*kw_json)[label]);
    } else {
      kws = extract_class_keywords(split, label, ExtractionConfig{});
    }
    auto entries = score_class_keywords(split, label, kws, *encoder, o.prompt_template);
    std::string stem = "report_" + safe_name(label);
    write_report_csv(dir / (stem + ".csv"), entries);
    std::ofstream md(dir / (stem + ".md"), std::ios::trunc);
    md << report_markdown("Bias keywords for class " + label, entries);
    std::cout << "class " << label << ": " << entries.size() << " keywords";
    if (!entries.empty()) {
      std::printf(", top '%s' score %.6f", entries.front().keyword.phrase.c_str(), entries.front().clip_score);
      std::fflush(stdout);
    }
    std::cout << '\n';
  }
  return 0;
}

// ---- score-sd --------------------------------------------------------------

struct ScoreSdOpts {
  std::string keywords;
  std::vector<std::string> candidates;
  bool noisy = false;
  int samples = 100;
  std::vector<int> intervals;  // flattened lo,hi pairs
  std::string emit_plan;
};

int cmd_score_sd(const Globals& g, const ScoreSdOpts& o) {
  const std::string& mpath = need_manifest(g);
  GeneratedSet gen = load_generated(mpath);
  if (!gen.score_store) throw IoError(mpath + ": generated manifest has no 'scores' directory");
  FileScoreProvider provider(*gen.score_store);

  std::vector<std::string> candidates = o.candidates;
  if (!o.keywords.empty()) {
    json kj = read_json(o.keywords);
    if (!kj.contains(gen.prompt)) throw InvalidArgument("keywords file has no entry for prompt '" + gen.prompt + "'");
    for (const auto& k : keywords_from_json(kj[gen.prompt])) candidates.push_back(k.phrase);
  }
  if (candidates.empty()) throw UsageError("give --keywords or --candidate");

  NoiseSpec spec;
  if (o.noisy || !o.emit_plan.empty()) {
    spec.seed = need_seed(g, "noisy SD scoring");
    spec.samples_per_interval = o.samples;
    if (!o.intervals.empty()) {
      if (o.intervals.size() % 2 != 0) throw UsageError("--interval takes lo hi pairs");
      spec.intervals.clear();
      for (std::size_t i = 0; i < o.intervals.size(); i += 2) spec.intervals.push_back({o.intervals[i], o.intervals[i + 1]});
    }
    spec.validate();
  }
  fs::path dir = out_dir(g);
  if (!o.emit_plan.empty()) {
    json plan = json::array();
    auto rows = sample_noise_plan(spec);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      json samples = json::array();
      for (const auto& s : rows[k]) samples.push_back({{"timestep", s.timestep}, {"noise_seed", s.noise_seed}});
      plan.push_back({{"lo", spec.intervals[k].lo}, {"hi", spec.intervals[k].hi}, {"samples", samples}});
    }
    write_json(o.emit_plan, {{"seed", spec.seed}, {"intervals", plan}});
    std::cout << "wrote " << o.emit_plan << '\n';
    if (!o.noisy && o.candidates.empty() && o.keywords.empty()) return 0;
  }

  auto ranked = rank_sd_keywords(candidates, gen.prompt, gen.image_ids, provider);
  std::ofstream csv(dir / "sd_report.csv", std::ios::trunc);
  csv.precision(17);
  csv << "keyword,score";
  for (const auto& iv : spec.intervals) {
    if (o.noisy) csv << ",t" << iv.lo << '_' << iv.hi;
  }
  csv << '\n';
  for (const auto& e : ranked) {
    csv << text::csv_escape(e.keyword) << ',' << e.score;
    if (o.noisy) {
      for (double v : sd_score_noisy(e.keyword, gen.prompt, gen.image_ids, provider, spec)) csv << ',' << v;
    }
    csv << '\n';
    std::printf("%-24s %.6f\n", e.keyword.c_str(), e.score);
  }
  std::fflush(stdout);
  return 0;
}

// ---- debias-prompts --------------------------------------------------------

struct DebiasOpts {
  std::string design = "waterbirds";
  std::vector<std::string> reports;
  std::string mode = "pos";
  double threshold = 0.0;
  std::string general = "plain";
  bool exclude_class_names = false;
  bool evaluate = false;
};

std::vector<KeywordBiasEntry> reports_for(const Globals& g, const std::vector<std::string>& paths) {
  std::vector<std::vector<KeywordBiasEntry>> reports;
  if (!paths.empty()) {
    for (const auto& p : paths) reports.push_back(read_report_csv(p));
  } else {
    const std::string& mpath = need_manifest(g);
    EvaluatedSplit split = load_evaluated(mpath);
    auto encoder = encoder_from_manifest(read_manifest(mpath));
    for (const auto& label : split.classes()) {
      auto kws = extract_class_keywords(split, label, ExtractionConfig{});
      reports.push_back(score_class_keywords(split, label, kws, *encoder));
    }
  }
  return merge_class_reports(reports);
}

int cmd_debias_prompts(const Globals& g, const DebiasOpts& o) {
  PromptDesign design = load_design(o.design);
  PromptBuildOptions opts;
  if (o.mode == "pos") {
    opts.mode = KeywordMode::kPos;
  } else if (o.mode == "neg") {
    opts.mode = KeywordMode::kNeg;
  } else {
    throw UsageError("--mode must be pos or neg");
  }
  opts.threshold = o.threshold;
  opts.exclude_class_name_keywords = o.exclude_class_names;
  opts.general_templates = general_templates(o.general);

  auto entries = reports_for(g, o.reports);
  PromptSet ps = build_prompt_set(design.debias, entries, opts);
  fs::path dir = out_dir(g);
  write_prompt_set(dir / ("prompts_" + o.mode + ".json"), ps);
  PromptSet base = build_base_prompt_set(design.debias, opts.general_templates);
  write_prompt_set(dir / "prompts_base.json", base);
  std::size_t total = 0;
  for (const auto& [label, prompts] : ps.prompts) total += prompts.size();
  std::cout << "wrote " << total << " " << to_string(ps.source) << " prompts to "
            << (dir / ("prompts_" + o.mode + ".json")).string() << '\n';

  if (o.evaluate) {
    const std::string& mpath = need_manifest(g);
    EvaluatedSplit split = load_evaluated(mpath);
    auto encoder = encoder_from_manifest(read_manifest(mpath));
    auto eb = evaluate_zero_shot(split, base, *encoder);
    auto ed = evaluate_zero_shot(split, ps, *encoder);
    json result = {{"base", {{"worst", eb.report.worst}, {"average", eb.report.average}, {"worst_group", eb.report.worst_group}}},
                   {o.mode, {{"worst", ed.report.worst}, {"average", ed.report.average}, {"worst_group", ed.report.worst_group}}}};
    write_json(dir / ("zero_shot_" + o.mode + ".json"), result);
    std::printf("base: worst %.1f avg %.1f | b2t-%s: worst %.1f avg %.1f\n", 100 * eb.report.worst,
                100 * eb.report.average, o.mode.c_str(), 100 * ed.report.worst, 100 * ed.report.average);
    std::fflush(stdout);
  }
  return 0;
}

// ---- infer-groups ----------------------------------------------------------

struct InferOpts {
  std::string design = "waterbirds";
  std::string general = "plain";
  std::string positive;
};

int cmd_infer_groups(const Globals& g, const InferOpts& o) {
  const std::string& mpath = need_manifest(g);
  EvaluatedSplit split = load_evaluated(mpath);
  auto encoder = encoder_from_manifest(read_manifest(mpath));
  PromptDesign design = load_design(o.design);
  if (!design.groups) throw InvalidArgument("prompt design has no 'groups' section");
  PromptSet groups = build_group_prompt_set(*design.groups, general_templates(o.general));
  std::vector<std::string> ids;
  for (const auto& r : split.records()) ids.push_back(r.id);
  GroupAssignment ga = infer_group_labels(split.image_embeddings(), ids, groups, *encoder);
  fs::path dir = out_dir(g);
  export_group_labels(ga, dir / "group_labels.csv");
  std::cout << "wrote " << (dir / "group_labels.csv").string() << '\n';

  bool has_truth = !split.records().empty() &&
                   std::all_of(split.records().begin(), split.records().end(), [](const auto& r) { return r.group.has_value(); });
  if (has_truth) {
    std::string positive = o.positive.empty() ? groups.prompts.begin()->first : o.positive;
    std::vector<std::string> truth;
    for (const auto& r : split.records()) truth.push_back(*r.group);
    Prf1 m = prf1(ga.groups, truth, positive);
    write_json(dir / "group_metrics.json",
               {{"positive_group", positive}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}});
    std::printf("group '%s': P %.4f R %.4f F1 %.4f\n", positive.c_str(), m.precision, m.recall, m.f1);
    std::fflush(stdout);
  }
  return 0;
}

// ---- eval-auroc ------------------------------------------------------------

struct AurocOpts {
  std::string keyword;
  std::string label;
  std::string positive_group;
  std::string prompt_template{kDefaultKeywordTemplate};
};

int cmd_eval_auroc(const Globals& g, const AurocOpts& o) {
  const std::string& mpath = need_manifest(g);
  EvaluatedSplit split = load_evaluated(mpath);
  auto encoder = encoder_from_manifest(read_manifest(mpath));
  std::vector<float> emb = encoder->encode(PromptedKeyword{o.keyword, o.prompt_template}.prompt());
  std::vector<double> all = bias_label_scores(split.image_embeddings(), emb);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& r = split.records()[i];
    if (!o.label.empty() && r.true_class != o.label) continue;
    if (!r.group) throw InvalidArgument("record " + r.id + " has no ground-truth group");
    scores.push_back(all[i]);
    labels.push_back(*r.group == o.positive_group ? 1 : 0);
  }
  double auc = auroc(scores, labels);
  fs::path dir = out_dir(g);
  write_roc_csv(dir / "roc.csv", roc_curve(scores, labels));
  write_json(dir / "auroc.json", {{"keyword", o.keyword}, {"class", o.label}, {"positive_group", o.positive_group},
                                  {"auroc", auc}, {"samples", scores.size()}});
  std::printf("AUROC %.6f over %zu samples\n", auc, scores.size());
  std::fflush(stdout);
  return 0;
}

// ---- guidance-sim ----------------------------------------------------------

struct GuidanceOpts {
  std::string mode = "balance";
  std::size_t samples = 200;
  double p_plus = 0.9;
  double p_minus = 0.1;
  int steps = 50;
  std::size_t dim = 256;
  GuidanceParams params;
  bool params_set_edit = false;
};

int cmd_guidance_sim(const Globals& g, const GuidanceOpts& o) {
  std::uint64_t seed = need_seed(g, "guidance-sim");
  double target = 0.5;
  GuidanceParams params = o.params;
  if (o.mode == "eliminate") {
    target = 0.0;
    if (!o.params_set_edit) params.edit_scale = GuidanceParams::elimination().edit_scale;
  } else if (o.mode != "balance") {
    throw UsageError("--mode must be balance or eliminate");
  }
  params.validate();
  fs::path dir = out_dir(g);

  BalanceSimulation sim = simulate_balancing(o.samples, o.p_plus, o.p_minus, seed, target);
  {
    std::ofstream csv(dir / "balance.csv", std::ios::trunc);
    csv << "sample,direction,exhibited,ratio\n";
    std::size_t with = 0;
    for (std::size_t i = 0; i < sim.directions.size(); ++i) {
      with += sim.exhibited[i] ? 1 : 0;
      csv << i << ',' << sim.directions[i] << ',' << (sim.exhibited[i] ? 1 : 0) << ','
          << static_cast<double>(with) / static_cast<double>(i + 1) << '\n';
    }
  }

  // Toy denoising stream: fixed random score tensors per step.
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  MomentumState state;
  std::ofstream csv(dir / "guidance.csv", std::ios::trunc);
  csv << "step,edit_norm,active_fraction\n";
  std::vector<float> u(o.dim), p(o.dim), e(o.dim);
  for (int step = 0; step < o.steps; ++step) {
    for (auto* v : {&u, &p, &e}) {
      for (float& x : *v) x = normal(rng);
    }
    std::vector<float> base = cfg_base(u, p, params.guidance_scale);
    std::vector<float> out = fair_guidance_step(u, p, e, sim.directions.empty() ? 1 : sim.directions.back(), params, state);
    double norm = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < o.dim; ++i) {
      double d = static_cast<double>(out[i]) - base[i];
      norm += d * d;
      active += d != 0.0 ? 1 : 0;
    }
    csv << step << ',' << std::sqrt(norm) << ',' << static_cast<double>(active) / static_cast<double>(o.dim) << '\n';
  }
  write_json(dir / "guidance_summary.json",
             {{"mode", o.mode}, {"samples", o.samples}, {"final_ratio", sim.final_ratio}, {"seed", seed}});
  std::printf("final attribute ratio %.3f after %zu samples (target %.2f)\n", sim.final_ratio, o.samples, target);
  std::fflush(stdout);
  return 0;
}

// ---- synth -----------------------------------------------------------------

int cmd_synth(const Globals& g, WorldSpec spec) {
  spec.seed = need_seed(g, "synth");
  SynthWorld world = generate_world(spec);
  fs::path manifest = write_world(world, out_dir(g));
  write_json(out_dir(g) / "world.json", {{"planted_keyword", world.planted_keyword()},
                                         {"target_class", world.target_class()},
                                         {"minority_count", world.minority_ids.size()},
                                         {"seed", spec.seed}});
  std::cout << "wrote " << manifest.string() << " (" << world.minority_ids.size() << " minority samples, planted '"
            << world.planted_keyword() << "')\n";
  return 0;
}

// Rewrites "--set key=value" into "--key=value".
std::vector<std::string> expand_set(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--set") {
      if (i + 1 >= argc) throw UsageError("--set needs key=value");
      std::string kv = argv[++i];
      if (kv.find('=') == std::string::npos) throw UsageError("--set needs key=value, got '" + kv + "'");
      args.push_back("--" + kv);
    } else if (a.rfind("--set=", 0) == 0) {
      args.push_back("--" + a.substr(6));
    } else {
      args.push_back(a);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discover, score and mitigate visual bias keywords from caption corpora."};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(false);
  app.set_config("--config", "", "TOML config file; [subcommand] sections hold subcommand options");

  Globals g;
  app.add_option("--manifest", g.manifest, "Corpus manifest (JSON)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Seed for stochastic commands");
  app.add_option("--set", "Override any option: --set key=value");  // rewritten before parsing

  ExtractOpts ex;
  auto* extract = app.add_subcommand("extract", "Mine keywords from captions of mispredicted or generated images");
  extract->add_option("--max-ngram", ex.max_ngram, "Maximum n-gram size (default 3, or 1 for generated sets)");
  extract->add_option("--top-k", ex.top_k, "Keywords kept per class")->capture_default_str();
  extract->add_option("--dedup", ex.dedup, "Deduplication similarity threshold")->capture_default_str();
  extract->add_option("--stopwords", ex.stopwords, "Stopword file, one word per line");
  extract->add_option("--class", ex.labels, "Restrict to these classes");
  extract->add_option("--extra-captions", ex.extra_captions, "Captions JSONL from additional captioners");
  extract->add_option("--ensemble", ex.ensemble, "union, intersection or vote:K")->capture_default_str();

  ScoreClipOpts sc;
  auto* score_clip = app.add_subcommand("score-clip", "Rank keywords by CLIP score and subgroup accuracy");
  score_clip->add_option("--keywords", sc.keywords, "keywords.json from extract (default: extract now)");
  score_clip->add_option("--template", sc.prompt_template, "Keyword prompt with one [word] slot")->capture_default_str();
  score_clip->add_option("--class", sc.labels, "Restrict to these classes");

  ScoreSdOpts sd;
  auto* score_sd = app.add_subcommand("score-sd", "Rank keywords by SD score on a generated set");
  score_sd->add_option("--keywords", sd.keywords, "keywords.json from extract");
  score_sd->add_option("--candidate", sd.candidates, "Candidate keyword (repeatable)");
  score_sd->add_flag("--noisy", sd.noisy, "Also compute per-interval noisy scores (needs --seed)");
  score_sd->add_option("--samples", sd.samples, "Timesteps sampled per interval")->capture_default_str();
  score_sd->add_option("--interval", sd.intervals, "Timestep interval as 'lo hi' (repeatable)")->expected(2)->allow_extra_args();
  score_sd->add_option("--emit-plan", sd.emit_plan, "Write the sampled (timestep, noise seed) plan as JSON");

  DebiasOpts db;
  auto* debias = app.add_subcommand("debias-prompts", "Build B2T-pos / B2T-neg zero-shot prompt sets");
  debias->add_option("--design", db.design, "waterbirds, celeba or a prompt design JSON")->capture_default_str();
  debias->add_option("--report", db.reports, "report_<class>.csv from score-clip (repeatable; default: score now)");
  debias->add_option("--mode", db.mode, "pos or neg")->capture_default_str();
  debias->add_option("--threshold", db.threshold, "CLIP score threshold")->capture_default_str();
  debias->add_option("--general", db.general, "plain, imagenet80 or a template file")->capture_default_str();
  debias->add_flag("--exclude-class-names", db.exclude_class_names, "Skip keywords containing class-name tokens");
  debias->add_flag("--evaluate", db.evaluate, "Report worst-group accuracy of base and debiased prompts");

  InferOpts inf;
  auto* infer = app.add_subcommand("infer-groups", "Infer group labels with keyword prompts and export them");
  infer->add_option("--design", inf.design, "waterbirds, celeba or a prompt design JSON")->capture_default_str();
  infer->add_option("--general", inf.general, "plain, imagenet80 or a template file")->capture_default_str();
  infer->add_option("--positive", inf.positive, "Group treated as positive for P/R/F1");

  AurocOpts au;
  auto* eval_auroc = app.add_subcommand("eval-auroc", "Bias-label AUROC of a keyword's similarity scores");
  eval_auroc->add_option("--keyword", au.keyword, "Bias keyword")->required();
  eval_auroc->add_option("--positive-group", au.positive_group, "Ground-truth group labelled 1")->required();
  eval_auroc->add_option("--class", au.label, "Restrict to one class");
  eval_auroc->add_option("--template", au.prompt_template, "Keyword prompt with one [word] slot")->capture_default_str();

  GuidanceOpts gd;
  auto* guidance = app.add_subcommand("guidance-sim", "Simulate the attribute balancer and fair guidance steps");
  guidance->add_option("--mode", gd.mode, "balance or eliminate")->capture_default_str();
  guidance->add_option("--samples", gd.samples, "Generated samples")->capture_default_str();
  guidance->add_option("--p-plus", gd.p_plus, "P(attribute | +1 edit)")->capture_default_str();
  guidance->add_option("--p-minus", gd.p_minus, "P(attribute | -1 edit)")->capture_default_str();
  guidance->add_option("--steps", gd.steps, "Denoising steps in the toy stream")->capture_default_str();
  guidance->add_option("--dim", gd.dim, "Toy score tensor size")->capture_default_str();
  guidance->add_option("--guidance-scale", gd.params.guidance_scale)->capture_default_str();
  auto* edit_opt = guidance->add_option("--edit-scale", gd.params.edit_scale, "Default 4 (balance) or 12 (eliminate)");
  guidance->add_option("--warmup", gd.params.warmup_steps)->capture_default_str();
  guidance->add_option("--threshold", gd.params.threshold)->capture_default_str();
  guidance->add_option("--momentum-scale", gd.params.momentum_scale)->capture_default_str();
  guidance->add_option("--momentum-beta", gd.params.momentum_beta)->capture_default_str();

  WorldSpec ws;
  auto* synth = app.add_subcommand("synth", "Write a synthetic biased world in corpus format");
  synth->add_option("--n", ws.n, "Samples")->capture_default_str();
  synth->add_option("--d", ws.d, "Embedding dimension")->capture_default_str();
  synth->add_option("--minority-fraction", ws.minority_fraction)->capture_default_str();
  synth->add_option("--bias-strength", ws.bias_strength, "Minimum cosine of minority rows with the bias direction")
      ->capture_default_str();
  synth->add_option("--p-wrong-minority", ws.p_wrong_minority)->capture_default_str();
  synth->add_option("--p-wrong-majority", ws.p_wrong_majority)->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_set(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (extract->parsed()) return cmd_extract(g, ex);
    if (score_clip->parsed()) return cmd_score_clip(g, sc);
    if (score_sd->parsed()) return cmd_score_sd(g, sd);
    if (debias->parsed()) return cmd_debias_prompts(g, db);
    if (infer->parsed()) return cmd_infer_groups(g, inf);
    if (eval_auroc->parsed()) return cmd_eval_auroc(g, au);
    if (guidance->parsed()) {
      gd.params_set_edit = edit_opt->count() > 0;
      return cmd_guidance_sim(g, gd);
    }
    if (synth->parsed()) return cmd_synth(g, ws);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return std::string(e.what()).rfind("manifest not found", 0) == 0 ? kExitUsage : kExitError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
