#pragma once

// Category-aware adaptive thresholds: each class gets a confidence cutoff read
// from its own ascending score list at a depth proportional to the class's
// share of the teacher's foreground predictions.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpl/core.hpp"
#include "rpl/suppression.hpp"

namespace rpl {

inline constexpr double kDefaultFallbackThreshold = 0.5;
inline constexpr double kDefaultObjectnessFloor = 0.05;

struct ForegroundPrediction {
  std::size_t class_id = 0;
  double score = 0.0;
};

struct CategoryStats {
  std::size_t class_id = 0;
  std::vector<double> sorted_scores;  // ascending
  std::size_t count = 0;
  double proportion = 0.0;

  friend bool operator==(const CategoryStats&, const CategoryStats&) = default;
};

class ThresholdTable {
 public:
  ThresholdTable() = default;
  ThresholdTable(std::vector<std::optional<double>> deltas, std::vector<CategoryStats> stats,
                 std::size_t foreground_count, std::uint64_t estimated_at, double fallback);

  // Every class ABSENT, so every class is filtered at `delta`.
  static ThresholdTable fixed(std::size_t classes, double delta, std::uint64_t estimated_at = 0);

  std::size_t class_count() const { return deltas_.size(); }
  const std::optional<double>& delta(std::size_t class_id) const { return deltas_.at(class_id); }
  // delta for the class, or the fallback when ABSENT.
  double threshold_for(std::size_t class_id) const;
  const std::vector<std::optional<double>>& deltas() const { return deltas_; }
  const std::vector<CategoryStats>& stats() const { return stats_; }
  std::size_t foreground_count() const { return foreground_count_; }
  std::uint64_t estimated_at() const { return estimated_at_; }
  double fallback() const { return fallback_; }

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;

 private:
  std::vector<std::optional<double>> deltas_;
  std::vector<CategoryStats> stats_;
  std::size_t foreground_count_ = 0;
  std::uint64_t estimated_at_ = 0;
  double fallback_ = kDefaultFallbackThreshold;
};

// One entry per box with objectness >= floor: its argmax class and score.
std::vector<ForegroundPrediction> collect_foreground(std::span<const ScoredBox> boxes, double objectness_floor);
std::vector<ForegroundPrediction> collect_foreground(std::span<const Frame> frames, double objectness_floor);

// Position in the ascending list of a class holding `count` of the
// `foreground_count` foreground boxes: floor(count * count / foreground_count)
// clamped to [0, count - 1].
std::size_t threshold_index(std::size_t count, std::size_t foreground_count);

ThresholdTable estimate_thresholds(std::span<const ForegroundPrediction> foreground, const ClassCatalog& catalog,
                                   double fallback = kDefaultFallbackThreshold, std::uint64_t iteration = 0);

// Keeps boxes whose survivor score reaches its class threshold; order is kept.
std::vector<PseudoBox> filter_by_threshold(std::span<const PseudoBox> pseudo_boxes, const ThresholdTable& table);

bool should_refresh(std::uint64_t iteration, std::uint64_t interval);

}  // namespace rpl
