#pragma once

#include <span>
#include <vector>

#include "rpl/core.hpp"

namespace rpl {

// M_IoU assigned to a survivor that suppressed nothing.
inline constexpr double kLoneBoxMeanIou = 1.0;

struct NmsOptions {
  double iou_threshold = 0.5;
  double lone_box_mean_iou = kLoneBoxMeanIou;
};

// An NMS survivor together with the boxes it suppressed and the mean IoU
// between them, which serves as a localization-variance estimate.
struct PseudoBox {
  ScoredBox survivor;
  std::vector<ScoredBox> suppressed;
  double mean_iou = kLoneBoxMeanIou;

  friend bool operator==(const PseudoBox&, const PseudoBox&) = default;
};

double mean_iou(const ScoredBox& survivor, std::span<const ScoredBox> suppressed,
                double lone_box_default = kLoneBoxMeanIou);

// Greedy per-class NMS that keeps each survivor's suppressed group.
//
// Boxes are visited in descending score order (ties: lower input index
// first). A box is suppressed by the first already-kept box of the same class
// whose IoU with it is strictly greater than the threshold. Survivors are
// returned in visiting order.
std::vector<PseudoBox> group_nms(std::span<const ScoredBox> boxes, const NmsOptions& options = {});

}  // namespace rpl
