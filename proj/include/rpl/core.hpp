#pragma once

// Geometry primitives and the data vocabulary shared by every stage of the
// pseudo-labeling pipeline.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpl {

inline constexpr std::size_t kNoProposal = std::numeric_limits<std::size_t>::max();

// Axis-aligned box in continuous scene coordinates (corner convention, no
// "+1" pixel correction).
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool valid() const;
  BBox translated(double dx, double dy) const { return {x_min + dx, y_min + dy, x_max + dx, y_max + dy}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

double area(const BBox& b);

// Intersection over union; 0 when the union is empty.
double iou(const BBox& a, const BBox& b);

class ClassCatalog {
 public:
  ClassCatalog() = default;
  explicit ClassCatalog(std::vector<std::string> names);

  // "class0", "class1", ...
  static ClassCatalog numbered(std::size_t count);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> index_of(const std::string& name) const;
  bool contains(std::size_t id) const { return id < names_.size(); }

  friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;

 private:
  std::vector<std::string> names_;
};

// Foreground class probabilities plus a separate objectness; background
// probability is 1 - objectness.
struct ClassDistribution {
  std::vector<double> probs;
  double objectness = 1.0;

  std::size_t argmax() const;
  // Throws Malformed unless entries lie in [0,1] and sum to 1 within 1e-9.
  void validate() const;

  static ClassDistribution uniform(std::size_t classes, double objectness = 1.0);

  friend bool operator==(const ClassDistribution&, const ClassDistribution&) = default;
};

struct ScoredBox {
  BBox box;
  std::size_t class_id = 0;
  double score = 0.0;
  ClassDistribution dist;
  // Index of the proposal this prediction came from inside its frame.
  std::size_t proposal = kNoProposal;

  // Labels the box with the argmax class of `dist` and that class's probability.
  static ScoredBox from_distribution(const BBox& box, ClassDistribution dist,
                                     std::size_t proposal = kNoProposal);

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

struct GroundTruthBox {
  std::size_t class_id = 0;
  BBox box;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

using FrameTruth = std::vector<GroundTruthBox>;

struct Frame {
  std::string frame_id;
  std::vector<ScoredBox> boxes;
  std::vector<std::vector<double>> features;

  std::size_t feature_dim() const { return features.empty() ? 0 : features.front().size(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Dataset {
  std::vector<Frame> frames;
  ClassCatalog catalog;
  std::optional<std::vector<FrameTruth>> ground_truth;

  std::size_t feature_dim() const;
  // Checks frame ids, feature dimensions, class ids and distributions.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace rpl
