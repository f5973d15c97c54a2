#pragma once

// Detection AP at a fixed IoU and the per-class pseudo-label bias audit.

#include <optional>
#include <span>
#include <vector>

#include "rpl/core.hpp"

namespace rpl {

inline constexpr double kDefaultMatchIou = 0.5;

struct Detection {
  std::size_t class_id = 0;
  BBox box;
  double score = 0.0;
};

using FrameDetections = std::vector<Detection>;

struct MatchCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

struct PrPoint {
  double score = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct ClassMatch {
  // In descending score order (ties keep frame order, then input order).
  std::vector<Detection> ranked;
  std::vector<bool> is_true_positive;
  std::size_t ground_truth_count = 0;
};

// Greedy matching: predictions visited by descending score; each one takes the
// highest-IoU still-unmatched ground-truth box of its class in the same frame
// and is a true positive iff that IoU reaches the threshold.
ClassMatch match_class(std::span<const FrameDetections> predictions, std::span<const FrameTruth> ground_truth,
                       std::size_t class_id, double iou_threshold = kDefaultMatchIou);

std::vector<PrPoint> pr_curve(const ClassMatch& match);

// All-points interpolated AP; nullopt when the class has no ground truth.
std::optional<double> average_precision(std::span<const FrameDetections> predictions,
                                        std::span<const FrameTruth> ground_truth, std::size_t class_id,
                                        double iou_threshold = kDefaultMatchIou);

struct APResult {
  std::vector<std::optional<double>> per_class_ap;
  double map_50 = 0.0;
  std::vector<MatchCounts> counts;
};

// Mean over classes that have ground truth. Throws when no class has any.
APResult mean_ap(std::span<const FrameDetections> predictions, std::span<const FrameTruth> ground_truth,
                 const ClassCatalog& catalog, double iou_threshold = kDefaultMatchIou);

struct ClassAudit {
  std::size_t pseudo_count = 0;
  std::size_t ground_truth_count = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  // pseudo / ground truth; nullopt when the class has no ground truth.
  std::optional<double> ratio;
  std::optional<double> recall;
};

struct BiasAudit {
  std::vector<ClassAudit> classes;
  // max ratio / min ratio over classes with ground truth. Infinite when some
  // ratio is zero and another is not; nullopt when no ratio is positive.
  std::optional<double> dispersion;
};

BiasAudit audit_pseudo_labels(std::span<const FrameDetections> pseudo, std::span<const FrameTruth> ground_truth,
                              const ClassCatalog& catalog, double iou_threshold = kDefaultMatchIou);

}  // namespace rpl
