#pragma once

#include <span>
#include <string>
#include <vector>

#include "rpl/core.hpp"
#include "rpl/suppression.hpp"

namespace rpl {

inline constexpr double kDefaultBeta = 0.85;

// Filtered pseudo labels split by localization certainty.
struct PseudoLabelSet {
  std::vector<PseudoBox> certain;    // mean_iou > beta
  std::vector<PseudoBox> uncertain;  // mean_iou <= beta
  double beta = kDefaultBeta;
};

// Teacher proposals backing one uncertain label: the survivor followed by its
// suppressed group, each with the teacher's class distribution.
struct ProposalMatch {
  std::string frame_id;
  std::vector<BBox> proposals;
  std::vector<std::size_t> proposal_indices;
  std::vector<ClassDistribution> teacher_dists;

  std::size_t size() const { return proposals.size(); }
};

PseudoLabelSet partition(std::span<const PseudoBox> pseudo_boxes, double beta = kDefaultBeta);

std::vector<ProposalMatch> match_proposals(std::span<const PseudoBox> uncertain, const std::string& frame_id = {});

std::size_t total_proposals(std::span<const ProposalMatch> matches);

}  // namespace rpl
