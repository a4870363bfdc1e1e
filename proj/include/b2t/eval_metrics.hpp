#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "b2t/corpus_store.hpp"

namespace b2t {

// Mann-Whitney AUROC: probability that a random positive outscores a random
// negative, ties credited 0.5. labels are 0/1. Requires both classes.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// One point per distinct score (descending), starting at (0, 0).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Precision is 0 when nothing is predicted positive; f1 is 0 when P + R = 0.
Prf1 prf1(std::span<const std::string> predicted, std::span<const std::string> truth,
          const std::string& positive_group);

struct GroupAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return static_cast<double>(correct) / static_cast<double>(total); }
};

struct GroupAccuracyReport {
  std::map<std::string, GroupAccuracy> groups;
  std::string worst_group;
  double worst = 0.0;
  // Sample-weighted: total correct over total samples.
  double average = 0.0;
};

GroupAccuracyReport group_accuracies(std::span<const std::string> predicted,
                                     std::span<const std::string> truth,
                                     std::span<const std::string> groups);
// Same, but every group in `expected` must have at least one sample.
GroupAccuracyReport group_accuracies(std::span<const std::string> predicted,
                                     std::span<const std::string> truth,
                                     std::span<const std::string> groups,
                                     std::span<const std::string> expected);

// Cosine similarity of each image row to a bias prompt embedding.
std::vector<double> bias_label_scores(const EmbeddingMatrix& images, std::span<const float> prompt_emb);

}  // namespace b2t
