#include "rpl/assignment.hpp"

#include "rpl/error.hpp"

namespace rpl {

PseudoLabelSet partition(std::span<const PseudoBox> pseudo_boxes, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "beta must lie in [0,1]");
  PseudoLabelSet out;
  out.beta = beta;
  for (const auto& p : pseudo_boxes) {
    (p.mean_iou > beta ? out.certain : out.uncertain).push_back(p);
  }
  return out;
}

namespace {

void append(ProposalMatch& m, const ScoredBox& b) {
  m.proposals.push_back(b.box);
  m.proposal_indices.push_back(b.proposal);
  m.teacher_dists.push_back(b.dist);
}

}  // namespace

std::vector<ProposalMatch> match_proposals(std::span<const PseudoBox> uncertain, const std::string& frame_id) {
  std::vector<ProposalMatch> out;
  out.reserve(uncertain.size());
  for (const auto& p : uncertain) {
    ProposalMatch m;
    m.frame_id = frame_id;
    append(m, p.survivor);
    for (const auto& s : p.suppressed) append(m, s);
    out.push_back(std::move(m));
  }
  return out;
}

std::size_t total_proposals(std::span<const ProposalMatch> matches) {
  std::size_t n = 0;
  for (const auto& m : matches) n += m.size();
  return n;
}

}  // namespace rpl
