#pragma once

// Toy differentiable detector: per-proposal linear objectness, linear-softmax
// classifier and linear box refiner over the proposal's feature vector.
// Analytic gradients of the self-training objective live here too.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rpl/assignment.hpp"
#include "rpl/core.hpp"
#include "rpl/losses.hpp"
#include "rpl/suppression.hpp"

namespace rpl {

class DetectorParams {
 public:
  struct Block {
    std::string name;
    std::size_t rows;
    std::size_t cols;
  };

  DetectorParams() = default;
  // Zero-initialized parameters.
  DetectorParams(std::size_t classes, std::size_t feature_dim);
  DetectorParams(std::size_t classes, std::size_t feature_dim, std::vector<double> values);

  std::size_t class_count() const { return classes_; }
  std::size_t feature_dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }
  static std::size_t size_for(std::size_t classes, std::size_t feature_dim);

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Row-major C x d.
  std::span<double> class_weights() { return block(0, classes_ * dim_); }
  std::span<const double> class_weights() const { return block(0, classes_ * dim_); }
  std::span<double> class_bias() { return block(class_bias_offset(), classes_); }
  std::span<const double> class_bias() const { return block(class_bias_offset(), classes_); }
  std::span<double> objectness_weights() { return block(objectness_offset(), dim_); }
  std::span<const double> objectness_weights() const { return block(objectness_offset(), dim_); }
  double& objectness_bias() { return values_[objectness_offset() + dim_]; }
  double objectness_bias() const { return values_[objectness_offset() + dim_]; }
  // Row-major 4 x d.
  std::span<double> box_weights() { return block(box_offset(), 4 * dim_); }
  std::span<const double> box_weights() const { return block(box_offset(), 4 * dim_); }
  std::span<double> box_bias() { return block(box_offset() + 4 * dim_, 4); }
  std::span<const double> box_bias() const { return block(box_offset() + 4 * dim_, 4); }

  // Named blocks in storage order: W, b, w_obj, b_obj, V, c.
  std::vector<Block> layout() const;

  bool finite() const;
  bool same_shape(const DetectorParams& other) const {
    return classes_ == other.classes_ && dim_ == other.dim_;
  }

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;

 private:
  std::size_t class_bias_offset() const { return classes_ * dim_; }
  std::size_t objectness_offset() const { return class_bias_offset() + classes_; }
  std::size_t box_offset() const { return objectness_offset() + dim_ + 1; }
  std::span<double> block(std::size_t offset, std::size_t n) { return std::span<double>(values_).subspan(offset, n); }
  std::span<const double> block(std::size_t offset, std::size_t n) const {
    return std::span<const double>(values_).subspan(offset, n);
  }

  std::size_t classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct ProposalOutput {
  ClassDistribution dist;
  RegressionTarget offsets;
};

ProposalOutput evaluate_proposal(const DetectorParams& params, std::span<const double> features);

// One ScoredBox per proposal, in proposal order, with refined boxes.
std::vector<ScoredBox> predict(const DetectorParams& params, const Frame& frame);
// Same, but reading an alternative view of the frame's features.
std::vector<ScoredBox> predict(const DetectorParams& params, const Frame& frame,
                               std::span<const std::vector<double>> features);

// Predictions gated by objectness, then suppressed into pseudo boxes.
std::vector<PseudoBox> detect(std::span<const ScoredBox> predictions, double objectness_floor,
                              const NmsOptions& nms = {});

enum class TargetKind { Ignore, Background, Foreground, Soft };

struct ProposalTarget {
  TargetKind kind = TargetKind::Ignore;
  std::size_t class_id = 0;
  RegressionTarget offsets;
  ClassDistribution teacher;
};

struct TargetOptions {
  // Proposals reaching this IoU with a label box are trained as that label.
  double foreground_iou = 0.5;
  // Proposals below this IoU with every label box (certain labels and
  // uncertain survivors) are trained as background.
  double background_iou = 0.5;
};

// Per-proposal training targets for one frame. Certain labels give hard
// classification, objectness and regression targets; proposals listed in the
// uncertain matches get the teacher's soft distribution and nothing else.
// A frame without any label yields only Ignore targets.
std::vector<ProposalTarget> build_targets(const Frame& frame, std::span<const GroundTruthBox> certain_labels,
                                          std::span<const ProposalMatch> uncertain,
                                          const TargetOptions& options = {});

struct TrainingExample {
  const Frame* frame = nullptr;
  std::vector<std::vector<double>> features;  // the view the student sees
  std::vector<ProposalTarget> targets;
};

struct ObjectiveResult {
  LossBreakdown loss;
  DetectorParams gradient;
};

LossBreakdown objective(const DetectorParams& params, std::span<const TrainingExample> batch,
                        Reduction reduction = Reduction::Mean);
ObjectiveResult objective_and_gradient(const DetectorParams& params, std::span<const TrainingExample> batch,
                                       Reduction reduction = Reduction::Mean);

// Gradient descent step: params - gamma * grad.
DetectorParams student_step(const DetectorParams& params, const DetectorParams& grad, double gamma);

// alpha * teacher + (1 - alpha) * student, elementwise.
DetectorParams ema_update(const DetectorParams& teacher, const DetectorParams& student, double alpha);

}  // namespace rpl
