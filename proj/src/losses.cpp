#include "rpl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "rpl/error.hpp"

namespace rpl {

namespace {

double safe_log(double p) { return std::log(std::clamp(p, kProbabilityFloor, 1.0)); }

}  // namespace

RegressionTarget encode_offsets(const BBox& reference, const BBox& target) {
  const double rw = reference.width(), rh = reference.height();
  const double tw = target.width(), th = target.height();
  if (!(rw > 0.0 && rh > 0.0 && tw > 0.0 && th > 0.0))
    throw Error(ErrorKind::InvalidArgument, "regression offsets need boxes with positive size");
  return {{(target.center_x() - reference.center_x()) / rw, (target.center_y() - reference.center_y()) / rh,
           std::log(tw / rw), std::log(th / rh)}};
}

BBox decode_offsets(const BBox& reference, const RegressionTarget& t) {
  const double rw = reference.width(), rh = reference.height();
  const double cx = reference.center_x() + t.offsets[0] * rw;
  const double cy = reference.center_y() + t.offsets[1] * rh;
  const double w = rw * std::exp(t.offsets[2]);
  const double h = rh * std::exp(t.offsets[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

bool LossBreakdown::finite() const {
  return std::isfinite(l_cls) && std::isfinite(l_reg) && std::isfinite(l_det) && std::isfinite(l_u) &&
         std::isfinite(l_sl);
}

double cls_loss(const ClassDistribution& pred, std::size_t target_class) {
  if (target_class >= pred.probs.size()) throw Error(ErrorKind::InvalidArgument, "target class out of range");
  return -safe_log(pred.probs[target_class]);
}

double objectness_loss(double objectness, bool foreground) {
  return foreground ? -safe_log(objectness) : -safe_log(1.0 - objectness);
}

double smooth_l1(double e) {
  const double a = std::abs(e);
  return a < 1.0 ? 0.5 * e * e : a - 0.5;
}

double smooth_l1_derivative(double e) {
  if (std::abs(e) < 1.0) return e;
  return e > 0.0 ? 1.0 : -1.0;
}

double reg_loss(const RegressionTarget& pred, const RegressionTarget& target) {
  double sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) sum += smooth_l1(pred.offsets[k] - target.offsets[k]);
  return sum;
}

double soft_cross_entropy(const ClassDistribution& teacher, const ClassDistribution& student) {
  if (teacher.probs.size() != student.probs.size())
    throw Error(ErrorKind::InvalidArgument, "teacher and student distributions differ in class count");
  double sum = 0.0;
  for (std::size_t j = 0; j < teacher.probs.size(); ++j) {
    if (teacher.probs[j] != 0.0) sum -= teacher.probs[j] * safe_log(student.probs[j]);
  }
  return sum;
}

double entropy(const ClassDistribution& dist) { return soft_cross_entropy(dist, dist); }

double uncertain_loss(std::span<const ProposalMatch> matches, std::span<const ClassDistribution> student_dists) {
  if (total_proposals(matches) != student_dists.size())
    throw Error(ErrorKind::InvalidArgument, "student distributions do not align with the uncertain proposals");
  double sum = 0.0;
  std::size_t k = 0;
  for (const auto& m : matches) {
    for (const auto& t : m.teacher_dists) sum += soft_cross_entropy(t, student_dists[k++]);
  }
  return sum;
}

LossBreakdown total_loss(std::span<const CertainTerm> certain_terms, std::span<const double> uncertain_terms,
                         Reduction reduction) {
  LossBreakdown out;
  for (const auto& t : certain_terms) {
    out.l_cls += t.cls;
    out.l_reg += t.reg;
  }
  for (double u : uncertain_terms) out.l_u += u;
  if (reduction == Reduction::Mean) {
    if (!certain_terms.empty()) {
      out.l_cls /= static_cast<double>(certain_terms.size());
      out.l_reg /= static_cast<double>(certain_terms.size());
    }
    if (!uncertain_terms.empty()) out.l_u /= static_cast<double>(uncertain_terms.size());
  }
  out.l_det = out.l_cls + out.l_reg;
  out.l_sl = out.l_det + out.l_u;
  return out;
}

}  // namespace rpl
