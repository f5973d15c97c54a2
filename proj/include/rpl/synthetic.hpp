#pragma once

// Long-tailed synthetic detection scenes with a source and a shifted target
// domain, plus supervised pretraining of the toy detector on the source.

#include <cstdint>
#include <vector>

#include "rpl/core.hpp"
#include "rpl/detector.hpp"

namespace rpl {

struct SceneConfig {
  std::size_t class_count = 6;
  double class_skew = 1.2;  // Zipf exponent; class c has weight (c + 1)^-skew
  double scene_width = 100.0;
  double scene_height = 100.0;
  std::size_t objects_min = 2;
  std::size_t objects_max = 5;
  double box_size_mean = 18.0;
  double box_size_spread = 0.2;   // log-normal sigma of the box side
  double class_size_spread = 0.3;  // log-normal sigma of per-class scale
  std::size_t proposals_per_object = 6;
  double proposal_jitter = 0.1;
  double hard_fraction = 0.25;
  double hard_jitter_scale = 2.5;
  std::size_t background_proposals = 4;
  std::size_t embed_dim = 8;
  double prototype_scale = 0.6;   // spread of the class-specific prototype part
  double foreground_scale = 2.0;  // length of the direction shared by all classes
  double object_noise = 0.3;      // per-object appearance deviation
  double feature_noise = 0.3;     // per-proposal noise
  double offset_scale = 1.0;
  double offset_noise = 0.05;
  double hard_offset_noise = 0.3;
  double domain_shift = 2.0;
  double target_extra_noise = 0.3;
  std::size_t source_frames = 400;
  std::size_t target_train_frames = 400;
  std::size_t target_test_frames = 200;
  std::uint64_t seed = 1;

  std::size_t feature_dim() const { return embed_dim + 4; }
  // Throws Config naming the first offending field.
  void validate() const;
};

// Relative frequency of each class under the configured skew.
std::vector<double> class_weights(const SceneConfig& config);

class SyntheticDataset {
 public:
  SyntheticDataset(SceneConfig config, Dataset source, Dataset target_train, Dataset target_test,
                   std::vector<FrameTruth> target_train_truth);

  const SceneConfig& manifest() const { return config_; }
  const ClassCatalog& catalog() const { return source_.catalog; }

  // Labeled source split.
  const Dataset& source() const { return source_; }
  // Unlabeled target split used for adaptation; carries no ground truth.
  const Dataset& target_train() const { return target_train_; }

  // Evaluation interface. The held-out target split with ground truth, and
  // the hidden truth of the adaptation split for pseudo-label audits.
  const Dataset& target_test() const { return target_test_; }
  const std::vector<FrameTruth>& target_train_truth() const { return target_train_truth_; }

 private:
  SceneConfig config_;
  Dataset source_;
  Dataset target_train_;
  Dataset target_test_;
  std::vector<FrameTruth> target_train_truth_;
};

SyntheticDataset generate_dataset(const SceneConfig& config);

struct PretrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  double init_scale = 0.01;
  std::uint64_t seed = 1;
  TargetOptions targets;
};

// Small random parameters drawn from the "init" substream.
DetectorParams initial_params(std::size_t classes, std::size_t feature_dim, double scale, std::uint64_t seed);

// Supervised training of the toy detector on source ground truth.
DetectorParams pretrain_source(const Dataset& source, const PretrainConfig& config);

}  // namespace rpl
