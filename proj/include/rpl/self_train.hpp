#pragma once

// Mean-teacher self-training with refined pseudo labels: the teacher labels a
// weak view of each target frame, labels are thresholded per class, split by
// localization certainty and used to train the student on a strong view; the
// teacher then tracks the student by EMA.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpl/assignment.hpp"
#include "rpl/core.hpp"
#include "rpl/detector.hpp"
#include "rpl/evaluation.hpp"
#include "rpl/losses.hpp"
#include "rpl/thresholding.hpp"

namespace rpl {

inline constexpr std::uint64_t kNeverRefresh = std::numeric_limits<std::uint64_t>::max();

struct TrainConfig {
  double alpha = 0.99;   // EMA coefficient
  double gamma = 0.001;  // student learning rate
  double beta = kDefaultBeta;
  std::uint64_t refresh_interval = 500;
  double nms_iou_threshold = 0.5;
  double lone_box_mean_iou = kLoneBoxMeanIou;
  double objectness_floor = kDefaultObjectnessFloor;
  double fallback_threshold = kDefaultFallbackThreshold;
  std::uint64_t iterations = 0;
  std::size_t batch_size = 4;
  std::uint64_t rng_seed = 1;
  double weak_noise_sigma = 0.05;
  double strong_noise_sigma = 0.3;

  // Ablation switches. Without CATE every class is filtered at fixed_delta;
  // without LPLA every filtered label is treated as certain.
  bool use_cate = true;
  double fixed_delta = 0.9;
  bool use_lpla = true;

  // 0 means "every refresh_interval iterations".
  std::uint64_t eval_interval = 0;
  // 0 means the whole adaptation split.
  std::size_t estimation_frames = 0;
  Reduction reduction = Reduction::Mean;
  TargetOptions targets;

  // Throws Config naming the first offending field.
  void validate() const;
  std::uint64_t effective_eval_interval() const { return eval_interval ? eval_interval : refresh_interval; }
};

struct IterationLoss {
  std::uint64_t iteration = 0;
  LossBreakdown loss;
  std::size_t certain = 0;
  std::size_t uncertain = 0;
};

struct EvaluationRecord {
  std::uint64_t iteration = 0;
  APResult ap;
  std::optional<BiasAudit> audit;
};

struct TrainReport {
  std::vector<IterationLoss> losses;
  std::vector<EvaluationRecord> evaluations;
  std::vector<ThresholdTable> thresholds;
  std::optional<EvaluationRecord> final_evaluation;
  DetectorParams teacher;
  DetectorParams student;
};

// Held-out data the loop may consult only to report teacher quality.
struct Evaluator {
  const Dataset* test = nullptr;                               // with ground truth
  const std::vector<FrameTruth>* adaptation_truth = nullptr;  // optional, for pseudo-label audits
};

// Per-frame intermediate state of one iteration, for inspection in tests.
struct FrameTrace {
  std::uint64_t iteration = 0;
  std::string frame_id;
  std::vector<PseudoBox> filtered;
  PseudoLabelSet labels;
  std::vector<ProposalMatch> matches;
};

struct TrainHooks {
  std::function<void(const FrameTrace&)> on_frame;
  std::function<void(std::uint64_t, const DetectorParams& student, std::span<const TrainingExample>)> on_batch;
};

// Teacher pseudo labels for one frame: prediction, objectness gate, group
// NMS and threshold filtering.
std::vector<PseudoBox> teacher_pseudo_boxes(const DetectorParams& teacher, const Frame& frame,
                                            std::span<const std::vector<double>> features,
                                            const ThresholdTable& table, const TrainConfig& config);

// Threshold table the loop would use at `iteration`.
ThresholdTable refresh_thresholds(const DetectorParams& teacher, std::span<const Frame> estimation_frames,
                                  const ClassCatalog& catalog, const TrainConfig& config, std::uint64_t iteration);

// NMS survivors of the detector on each frame, as scored detections.
std::vector<FrameDetections> detections(const DetectorParams& params, const Dataset& dataset, double objectness_floor,
                                        const NmsOptions& nms = {});

APResult evaluate_detector(const DetectorParams& params, const Dataset& labeled, double objectness_floor,
                           const NmsOptions& nms = {});

std::vector<FrameDetections> pseudo_label_detections(const DetectorParams& teacher, const Dataset& dataset,
                                                     const ThresholdTable& table, const TrainConfig& config);

TrainReport self_train(const TrainConfig& config, const Dataset& dataset, const DetectorParams& source_params,
                       const Evaluator& evaluator = {}, const TrainHooks& hooks = {});

}  // namespace rpl
