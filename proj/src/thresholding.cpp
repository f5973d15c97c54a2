#include "rpl/thresholding.hpp"

#include <algorithm>
#include <cmath>

#include "rpl/error.hpp"

namespace rpl {

ThresholdTable::ThresholdTable(std::vector<std::optional<double>> deltas, std::vector<CategoryStats> stats,
                               std::size_t foreground_count, std::uint64_t estimated_at, double fallback)
    : deltas_(std::move(deltas)),
      stats_(std::move(stats)),
      foreground_count_(foreground_count),
      estimated_at_(estimated_at),
      fallback_(fallback) {
  if (!(fallback_ >= 0.0 && fallback_ <= 1.0)) throw Error(ErrorKind::InvalidArgument, "fallback threshold outside [0,1]");
}

ThresholdTable ThresholdTable::fixed(std::size_t classes, double delta, std::uint64_t estimated_at) {
  std::vector<CategoryStats> stats(classes);
  for (std::size_t c = 0; c < classes; ++c) stats[c].class_id = c;
  return ThresholdTable(std::vector<std::optional<double>>(classes), std::move(stats), 0, estimated_at, delta);
}

double ThresholdTable::threshold_for(std::size_t class_id) const {
  if (class_id >= deltas_.size()) throw Error(ErrorKind::Malformed, "class id " + std::to_string(class_id) + " outside threshold table");
  return deltas_[class_id].value_or(fallback_);
}

std::vector<ForegroundPrediction> collect_foreground(std::span<const ScoredBox> boxes, double objectness_floor) {
  std::vector<ForegroundPrediction> out;
  for (const auto& b : boxes) {
    if (b.dist.objectness >= objectness_floor) {
      const std::size_t c = b.dist.argmax();
      out.push_back({c, b.dist.probs[c]});
    }
  }
  return out;
}

std::vector<ForegroundPrediction> collect_foreground(std::span<const Frame> frames, double objectness_floor) {
  if (frames.empty()) throw Error(ErrorKind::InvalidArgument, "threshold estimation needs at least one frame");
  std::vector<ForegroundPrediction> out;
  for (const auto& f : frames) {
    auto part = collect_foreground(std::span<const ScoredBox>(f.boxes), objectness_floor);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::size_t threshold_index(std::size_t count, std::size_t foreground_count) {
  if (count == 0 || foreground_count == 0) return 0;
  const std::size_t raw = (count * count) / foreground_count;
  return std::min(raw, count - 1);
}

ThresholdTable estimate_thresholds(std::span<const ForegroundPrediction> foreground, const ClassCatalog& catalog,
                                   double fallback, std::uint64_t iteration) {
  const std::size_t classes = catalog.size();
  std::vector<CategoryStats> stats(classes);
  for (std::size_t c = 0; c < classes; ++c) stats[c].class_id = c;
  for (const auto& p : foreground) {
    if (!catalog.contains(p.class_id)) throw Error(ErrorKind::Malformed, "foreground class id out of range");
    if (!(p.score >= 0.0 && p.score <= 1.0)) throw Error(ErrorKind::Malformed, "foreground score outside [0,1]");
    stats[p.class_id].sorted_scores.push_back(p.score);
  }

  const std::size_t total = foreground.size();
  std::vector<std::optional<double>> deltas(classes);
  for (auto& s : stats) {
    std::sort(s.sorted_scores.begin(), s.sorted_scores.end());
    s.count = s.sorted_scores.size();
    s.proportion = total ? static_cast<double>(s.count) / static_cast<double>(total) : 0.0;
    if (s.count > 0) deltas[s.class_id] = s.sorted_scores[threshold_index(s.count, total)];
  }
  return ThresholdTable(std::move(deltas), std::move(stats), total, iteration, fallback);
}

std::vector<PseudoBox> filter_by_threshold(std::span<const PseudoBox> pseudo_boxes, const ThresholdTable& table) {
  std::vector<PseudoBox> out;
  for (const auto& p : pseudo_boxes) {
    if (p.survivor.score >= table.threshold_for(p.survivor.class_id)) out.push_back(p);
  }
  return out;
}

bool should_refresh(std::uint64_t iteration, std::uint64_t interval) {
  if (interval == 0) throw Error(ErrorKind::Config, "refresh interval must be positive");
  return iteration % interval == 0;
}

}  // namespace rpl
