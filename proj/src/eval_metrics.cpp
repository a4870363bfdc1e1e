#include "b2t/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "b2t/error.hpp"

namespace b2t {

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw InvalidArgument("non-finite score");
    pos += static_cast<std::size_t>(labels[i]);
  }
  if (pos == 0 || pos == labels.size()) {
    throw InvalidArgument("AUROC needs at least one positive and one negative");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  std::vector<std::size_t> idx = order_by_score(scores);
  // Twice the rank sum of the positives, with tied blocks sharing their
  // average rank, keeps every intermediate an exact integer.
  double twice_rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double block_pos = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      block_pos += labels[idx[j]];
      ++j;
    }
    // Ranks i+1 .. j average to (i + 1 + j) / 2.
    twice_rank_sum += block_pos * static_cast<double>(i + 1 + j);
    n_pos += block_pos;
    i = j;
  }
  double n_neg = static_cast<double>(scores.size()) - n_pos;
  double twice_u = twice_rank_sum - n_pos * (n_pos + 1.0);
  return twice_u / (2.0 * n_pos * n_neg);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  std::vector<std::size_t> idx = order_by_score(scores);
  std::reverse(idx.begin(), idx.end());
  double n_pos = 0.0;
  for (int l : labels) n_pos += l;
  double n_neg = static_cast<double>(labels.size()) - n_pos;
  std::vector<RocPoint> out{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    double s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) {
      (labels[idx[i]] ? tp : fp) += 1.0;
      ++i;
    }
    out.push_back({fp / n_neg, tp / n_pos, s});
  }
  return out;
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : points) out << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
}

Prf1 prf1(std::span<const std::string> predicted, std::span<const std::string> truth,
          const std::string& positive_group) {
  if (predicted.size() != truth.size()) throw InvalidArgument("predicted and true groups differ in length");
  Prf1 r;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    bool p = predicted[i] == positive_group;
    bool t = truth[i] == positive_group;
    if (p && t) ++r.tp;
    if (p && !t) ++r.fp;
    if (!p && t) ++r.fn;
  }
  if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.precision + r.recall > 0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

GroupAccuracyReport group_accuracies(std::span<const std::string> predicted,
                                     std::span<const std::string> truth,
                                     std::span<const std::string> groups) {
  return group_accuracies(predicted, truth, groups, {});
}

GroupAccuracyReport group_accuracies(std::span<const std::string> predicted,
                                     std::span<const std::string> truth,
                                     std::span<const std::string> groups,
                                     std::span<const std::string> expected) {
  if (predicted.size() != truth.size() || predicted.size() != groups.size()) {
    throw InvalidArgument("predictions, truths and groups differ in length");
  }
  if (predicted.empty()) throw InvalidArgument("no samples to evaluate");
  GroupAccuracyReport r;
  for (const auto& g : expected) r.groups[g];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    auto& acc = r.groups[groups[i]];
    ++acc.total;
    if (predicted[i] == truth[i]) {
      ++acc.correct;
      ++correct;
    }
  }
  bool first = true;
  for (const auto& [name, acc] : r.groups) {
    if (acc.total == 0) throw InvalidArgument("empty group '" + name + "'");
    if (first || acc.accuracy() < r.worst) {
      r.worst = acc.accuracy();
      r.worst_group = name;
      first = false;
    }
  }
  r.average = static_cast<double>(correct) / static_cast<double>(predicted.size());
  return r;
}

std::vector<double> bias_label_scores(const EmbeddingMatrix& images, std::span<const float> prompt_emb) {
  if (prompt_emb.size() != images.dim()) throw InvalidArgument("dimension mismatch");
  std::vector<double> out(images.rows());
  for (std::size_t i = 0; i < images.rows(); ++i) {
    auto row = images.row(i);
    double dot = 0.0, nr = 0.0, np = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      dot += static_cast<double>(row[k]) * prompt_emb[k];
      nr += static_cast<double>(row[k]) * row[k];
      np += static_cast<double>(prompt_emb[k]) * prompt_emb[k];
    }
    if (nr == 0.0 || np == 0.0) throw InvalidArgument("zero-norm vector in bias label scoring");
    out[i] = dot / std::sqrt(nr * np);
  }
  return out;
}

}  // namespace b2t
