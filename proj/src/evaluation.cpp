#include "rpl/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "rpl/error.hpp"

namespace rpl {

namespace {

struct Candidate {
  std::size_t frame;
  const Detection* det;
};

void check_alignment(std::span<const FrameDetections> predictions, std::span<const FrameTruth> ground_truth) {
  if (predictions.size() != ground_truth.size())
    throw Error(ErrorKind::InvalidArgument, "predictions and ground truth cover different frame counts");
}

}  // namespace

ClassMatch match_class(std::span<const FrameDetections> predictions, std::span<const FrameTruth> ground_truth,
                       std::size_t class_id, double iou_threshold) {
  check_alignment(predictions, ground_truth);
  ClassMatch out;

  std::vector<Candidate> candidates;
  for (std::size_t f = 0; f < predictions.size(); ++f) {
    for (const auto& d : predictions[f]) {
      if (d.class_id == class_id) candidates.push_back({f, &d});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.det->score > b.det->score; });

  std::vector<std::vector<bool>> taken(ground_truth.size());
  for (std::size_t f = 0; f < ground_truth.size(); ++f) {
    taken[f].assign(ground_truth[f].size(), false);
    for (const auto& g : ground_truth[f]) out.ground_truth_count += g.class_id == class_id;
  }

  for (const auto& c : candidates) {
    const auto& truth = ground_truth[c.frame];
    double best = -1.0;
    std::size_t best_idx = truth.size();
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (truth[g].class_id != class_id || taken[c.frame][g]) continue;
      const double v = iou(c.det->box, truth[g].box);
      if (v > best) {
        best = v;
        best_idx = g;
      }
    }
    const bool tp = best_idx < truth.size() && best >= iou_threshold;
    if (tp) taken[c.frame][best_idx] = true;
    out.ranked.push_back(*c.det);
    out.is_true_positive.push_back(tp);
  }
  return out;
}

std::vector<PrPoint> pr_curve(const ClassMatch& match) {
  std::vector<PrPoint> out;
  out.reserve(match.ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < match.ranked.size(); ++k) {
    tp += match.is_true_positive[k];
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    const double recall = match.ground_truth_count
                              ? static_cast<double>(tp) / static_cast<double>(match.ground_truth_count)
                              : 0.0;
    out.push_back({match.ranked[k].score, precision, recall});
  }
  return out;
}

namespace {

double ap_from_match(const ClassMatch& match) {
  const std::size_t n = match.ranked.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += match.is_true_positive[k];
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  // Monotone envelope: precision at rank k becomes the best precision at any
  // rank >= k.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  // Each true positive adds a recall step of 1/G; dividing once at the end
  // makes a perfect ranking come out at exactly 1.
  double area = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (match.is_true_positive[k]) area += precision[k];
  }
  return area / static_cast<double>(match.ground_truth_count);
}

}  // namespace

std::optional<double> average_precision(std::span<const FrameDetections> predictions,
                                        std::span<const FrameTruth> ground_truth, std::size_t class_id,
                                        double iou_threshold) {
  const ClassMatch match = match_class(predictions, ground_truth, class_id, iou_threshold);
  if (match.ground_truth_count == 0) return std::nullopt;
  return ap_from_match(match);
}

APResult mean_ap(std::span<const FrameDetections> predictions, std::span<const FrameTruth> ground_truth,
                 const ClassCatalog& catalog, double iou_threshold) {
  APResult out;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    const ClassMatch match = match_class(predictions, ground_truth, c, iou_threshold);
    MatchCounts counts;
    counts.true_positives = static_cast<std::size_t>(std::count(match.is_true_positive.begin(), match.is_true_positive.end(), true));
    counts.false_positives = match.ranked.size() - counts.true_positives;
    counts.false_negatives = match.ground_truth_count - counts.true_positives;
    out.counts.push_back(counts);
    if (match.ground_truth_count == 0) {
      out.per_class_ap.push_back(std::nullopt);
      continue;
    }
    const double ap = ap_from_match(match);
    out.per_class_ap.push_back(ap);
    sum += ap;
    ++defined;
  }
  if (defined == 0) throw Error(ErrorKind::InvalidArgument, "mAP needs at least one ground-truth box");
  out.map_50 = sum / static_cast<double>(defined);
  return out;
}

BiasAudit audit_pseudo_labels(std::span<const FrameDetections> pseudo, std::span<const FrameTruth> ground_truth,
                              const ClassCatalog& catalog, double iou_threshold) {
  BiasAudit out;
  std::optional<double> lo, hi;
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    const ClassMatch match = match_class(pseudo, ground_truth, c, iou_threshold);
    ClassAudit a;
    a.pseudo_count = match.ranked.size();
    a.ground_truth_count = match.ground_truth_count;
    a.true_positives = static_cast<std::size_t>(std::count(match.is_true_positive.begin(), match.is_true_positive.end(), true));
    a.false_positives = a.pseudo_count - a.true_positives;
    a.false_negatives = a.ground_truth_count - a.true_positives;
    if (a.ground_truth_count > 0) {
      const double g = static_cast<double>(a.ground_truth_count);
      a.ratio = static_cast<double>(a.pseudo_count) / g;
      a.recall = static_cast<double>(a.true_positives) / g;
      lo = lo ? std::min(*lo, *a.ratio) : *a.ratio;
      hi = hi ? std::max(*hi, *a.ratio) : *a.ratio;
    }
    out.classes.push_back(a);
  }
  if (hi && *hi > 0.0) {
    out.dispersion = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace rpl
