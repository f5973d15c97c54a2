#pragma once

// Loss stack for self-training: hard detection loss on certain labels, soft
// teacher-to-student cross-entropy on the proposals behind uncertain labels,
// and their sum.

#include <array>
#include <span>
#include <vector>

#include "rpl/assignment.hpp"
#include "rpl/core.hpp"

namespace rpl {

// Lower clamp applied to every probability before taking its log.
inline constexpr double kProbabilityFloor = 1e-12;

// (dx, dy, dlog_w, dlog_h) relative to a reference box.
struct RegressionTarget {
  std::array<double, 4> offsets{};

  friend bool operator==(const RegressionTarget&, const RegressionTarget&) = default;
};

// Offsets that move `reference` onto `target`; both need positive size.
RegressionTarget encode_offsets(const BBox& reference, const BBox& target);
BBox decode_offsets(const BBox& reference, const RegressionTarget& t);

struct LossBreakdown {
  double l_cls = 0.0;
  double l_reg = 0.0;
  double l_det = 0.0;
  double l_u = 0.0;
  double l_sl = 0.0;

  bool finite() const;
  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

enum class Reduction { Sum, Mean };

double cls_loss(const ClassDistribution& pred, std::size_t target_class);

// Binary cross-entropy of the objectness against foreground/background.
double objectness_loss(double objectness, bool foreground);

double smooth_l1(double e);
double smooth_l1_derivative(double e);
double reg_loss(const RegressionTarget& pred, const RegressionTarget& target);

// sum_j -teacher_j * log(student_j)
double soft_cross_entropy(const ClassDistribution& teacher, const ClassDistribution& student);
double entropy(const ClassDistribution& dist);

// Soft loss over every proposal of every match; `student_dists` follows the
// flattened proposal order.
double uncertain_loss(std::span<const ProposalMatch> matches, std::span<const ClassDistribution> student_dists);

struct CertainTerm {
  double cls = 0.0;
  double reg = 0.0;
};

// Sum reduction adds the terms as they are; Mean divides the detection terms
// by the number of certain terms and the soft terms by their own count.
LossBreakdown total_loss(std::span<const CertainTerm> certain_terms, std::span<const double> uncertain_terms,
                         Reduction reduction = Reduction::Sum);

}  // namespace rpl
