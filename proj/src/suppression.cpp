#include "rpl/suppression.hpp"

#include <algorithm>
#include <numeric>

#include "rpl/error.hpp"

namespace rpl {

double mean_iou(const ScoredBox& survivor, std::span<const ScoredBox> suppressed, double lone_box_default) {
  if (suppressed.empty()) return lone_box_default;
  double sum = 0.0;
  for (const auto& s : suppressed) sum += iou(survivor.box, s.box);
  return sum / static_cast<double>(suppressed.size());
}

std::vector<PseudoBox> group_nms(std::span<const ScoredBox> boxes, const NmsOptions& options) {
  if (!(options.iou_threshold > 0.0 && options.iou_threshold < 1.0))
    throw Error(ErrorKind::InvalidArgument, "nms iou threshold must lie in (0,1)");

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].score > boxes[b].score; });

  std::vector<PseudoBox> kept;
  for (std::size_t idx : order) {
    const ScoredBox& candidate = boxes[idx];
    PseudoBox* owner = nullptr;
    for (auto& k : kept) {
      if (k.survivor.class_id == candidate.class_id && iou(k.survivor.box, candidate.box) > options.iou_threshold) {
        owner = &k;
        break;
      }
    }
    if (owner) {
      owner->suppressed.push_back(candidate);
    } else {
      kept.push_back(PseudoBox{candidate, {}, options.lone_box_mean_iou});
    }
  }
  for (auto& k : kept) k.mean_iou = mean_iou(k.survivor, k.suppressed, options.lone_box_mean_iou);
  return kept;
}

}  // namespace rpl
