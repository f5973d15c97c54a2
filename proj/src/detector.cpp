#include "rpl/detector.hpp"

#include <algorithm>
#include <cmath>

#include "rpl/error.hpp"

namespace rpl {

DetectorParams::DetectorParams(std::size_t classes, std::size_t feature_dim)
    : classes_(classes), dim_(feature_dim), values_(size_for(classes, feature_dim), 0.0) {
  if (classes == 0) throw Error(ErrorKind::InvalidArgument, "detector needs at least one class");
}

DetectorParams::DetectorParams(std::size_t classes, std::size_t feature_dim, std::vector<double> values)
    : classes_(classes), dim_(feature_dim), values_(std::move(values)) {
  if (classes == 0) throw Error(ErrorKind::InvalidArgument, "detector needs at least one class");
  if (values_.size() != size_for(classes, feature_dim))
    throw Error(ErrorKind::Malformed, "parameter vector length does not match the detector shape");
}

std::size_t DetectorParams::size_for(std::size_t classes, std::size_t feature_dim) {
  return classes * feature_dim + classes + feature_dim + 1 + 4 * feature_dim + 4;
}

std::vector<DetectorParams::Block> DetectorParams::layout() const {
  return {{"W", classes_, dim_}, {"b", classes_, 1}, {"w_obj", dim_, 1},
          {"b_obj", 1, 1},       {"V", 4, dim_},      {"c", 4, 1}};
}

bool DetectorParams::finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

void check_dim(const DetectorParams& params, std::size_t dim) {
  if (dim != params.feature_dim())
    throw Error(ErrorKind::InvalidArgument, "feature dimension " + std::to_string(dim) +
                                                " does not match detector dimension " +
                                                std::to_string(params.feature_dim()));
}

}  // namespace

ProposalOutput evaluate_proposal(const DetectorParams& params, std::span<const double> x) {
  check_dim(params, x.size());
  const std::size_t classes = params.class_count(), dim = params.feature_dim();
  ProposalOutput out;

  std::vector<double> logits(classes);
  const auto w = params.class_weights();
  const auto b = params.class_bias();
  for (std::size_t c = 0; c < classes; ++c) logits[c] = dot(w.subspan(c * dim, dim), x) + b[c];
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - top);
    z += l;
  }
  for (auto& l : logits) l /= z;
  out.dist.probs = std::move(logits);
  out.dist.objectness = sigmoid(dot(params.objectness_weights(), x) + params.objectness_bias());

  const auto v = params.box_weights();
  const auto c = params.box_bias();
  for (std::size_t k = 0; k < 4; ++k) out.offsets.offsets[k] = dot(v.subspan(k * dim, dim), x) + c[k];
  return out;
}

std::vector<ScoredBox> predict(const DetectorParams& params, const Frame& frame,
                               std::span<const std::vector<double>> features) {
  if (features.size() != frame.boxes.size())
    throw Error(ErrorKind::InvalidArgument, "frame '" + frame.frame_id + "': one feature vector per proposal required");
  std::vector<ScoredBox> out;
  out.reserve(frame.boxes.size());
  for (std::size_t i = 0; i < frame.boxes.size(); ++i) {
    ProposalOutput po = evaluate_proposal(params, features[i]);
    out.push_back(ScoredBox::from_distribution(decode_offsets(frame.boxes[i].box, po.offsets), std::move(po.dist), i));
  }
  return out;
}

std::vector<ScoredBox> predict(const DetectorParams& params, const Frame& frame) {
  return predict(params, frame, frame.features);
}

std::vector<PseudoBox> detect(std::span<const ScoredBox> predictions, double objectness_floor,
                              const NmsOptions& nms) {
  std::vector<ScoredBox> foreground;
  for (const auto& p : predictions) {
    if (p.dist.objectness >= objectness_floor) foreground.push_back(p);
  }
  return group_nms(foreground, nms);
}

std::vector<ProposalTarget> build_targets(const Frame& frame, std::span<const GroundTruthBox> certain_labels,
                                          std::span<const ProposalMatch> uncertain, const TargetOptions& options) {
  const std::size_t n = frame.boxes.size();
  std::vector<ProposalTarget> targets(n);
  if (certain_labels.empty() && uncertain.empty()) return targets;

  for (const auto& m : uncertain) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      const std::size_t idx = m.proposal_indices[k];
      if (idx >= n) throw Error(ErrorKind::InvalidArgument, "uncertain proposal index outside frame '" + frame.frame_id + "'");
      targets[idx].kind = TargetKind::Soft;
      targets[idx].teacher = m.teacher_dists[k];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const BBox& proposal = frame.boxes[i].box;
    double best = 0.0;
    std::size_t best_label = certain_labels.size();
    for (std::size_t l = 0; l < certain_labels.size(); ++l) {
      const double v = iou(proposal, certain_labels[l].box);
      if (v > best) {
        best = v;
        best_label = l;
      }
    }
    // Uncertain labels still mark their region as an object, so nearby
    // proposals outside the group are ignored rather than pushed to background.
    double near_uncertain = 0.0;
    for (const auto& m : uncertain) {
      if (!m.proposals.empty()) near_uncertain = std::max(near_uncertain, iou(proposal, m.proposals.front()));
    }
    ProposalTarget& t = targets[i];
    if (best_label < certain_labels.size() && best >= options.foreground_iou) {
      t.kind = TargetKind::Foreground;
      t.class_id = certain_labels[best_label].class_id;
      t.offsets = encode_offsets(proposal, certain_labels[best_label].box);
      t.teacher = {};
    } else if (t.kind != TargetKind::Soft && best < options.background_iou &&
               near_uncertain < options.background_iou) {
      t.kind = TargetKind::Background;
    }
  }
  return targets;
}

namespace {

// Accumulates loss terms and, when `grad` is set, their gradients.
LossBreakdown run_objective(const DetectorParams& params, std::span<const TrainingExample> batch,
                            Reduction reduction, DetectorParams* grad) {
  const std::size_t classes = params.class_count(), dim = params.feature_dim();

  std::size_t n_det = 0, n_soft = 0;
  for (const auto& ex : batch) {
    for (const auto& t : ex.targets) {
      if (t.kind == TargetKind::Foreground || t.kind == TargetKind::Background) ++n_det;
      if (t.kind == TargetKind::Soft) ++n_soft;
    }
  }
  const bool mean = reduction == Reduction::Mean;
  const double det_scale = (mean && n_det) ? 1.0 / static_cast<double>(n_det) : 1.0;
  const double soft_scale = (mean && n_soft) ? 1.0 / static_cast<double>(n_soft) : 1.0;

  std::vector<CertainTerm> certain;
  std::vector<double> soft;
  certain.reserve(n_det);
  soft.reserve(n_soft);

  std::vector<double> dz(classes);
  std::array<double, 4> de{};
  for (const auto& ex : batch) {
    if (!ex.frame) throw Error(ErrorKind::InvalidArgument, "training example without a frame");
    if (ex.targets.size() != ex.features.size())
      throw Error(ErrorKind::InvalidArgument, "targets and features differ in length");
    for (std::size_t i = 0; i < ex.targets.size(); ++i) {
      const ProposalTarget& t = ex.targets[i];
      if (t.kind == TargetKind::Ignore) continue;
      const std::span<const double> x = ex.features[i];
      const ProposalOutput out = evaluate_proposal(params, x);
      const auto& p = out.dist.probs;

      double da = 0.0;
      bool has_dz = false, has_de = false;
      switch (t.kind) {
        case TargetKind::Foreground: {
          if (t.class_id >= classes) throw Error(ErrorKind::InvalidArgument, "target class out of range");
          CertainTerm term;
          term.cls = objectness_loss(out.dist.objectness, true) + cls_loss(out.dist, t.class_id);
          term.reg = reg_loss(out.offsets, t.offsets);
          certain.push_back(term);
          da = det_scale * (out.dist.objectness - 1.0);
          for (std::size_t c = 0; c < classes; ++c) dz[c] = det_scale * (p[c] - (c == t.class_id ? 1.0 : 0.0));
          for (std::size_t k = 0; k < 4; ++k)
            de[k] = det_scale * smooth_l1_derivative(out.offsets.offsets[k] - t.offsets.offsets[k]);
          has_dz = has_de = true;
          break;
        }
        case TargetKind::Background: {
          certain.push_back({objectness_loss(out.dist.objectness, false), 0.0});
          da = det_scale * out.dist.objectness;
          break;
        }
        case TargetKind::Soft: {
          if (t.teacher.probs.size() != classes)
            throw Error(ErrorKind::InvalidArgument, "teacher distribution has the wrong class count");
          soft.push_back(soft_cross_entropy(t.teacher, out.dist));
          double mass = 0.0;
          for (double q : t.teacher.probs) mass += q;
          for (std::size_t c = 0; c < classes; ++c) dz[c] = soft_scale * (mass * p[c] - t.teacher.probs[c]);
          has_dz = true;
          break;
        }
        case TargetKind::Ignore:
          break;
      }

      if (!grad) continue;
      auto gw = grad->class_weights();
      auto gb = grad->class_bias();
      if (has_dz) {
        for (std::size_t c = 0; c < classes; ++c) {
          gb[c] += dz[c];
          for (std::size_t k = 0; k < dim; ++k) gw[c * dim + k] += dz[c] * x[k];
        }
      }
      if (da != 0.0) {
        auto go = grad->objectness_weights();
        for (std::size_t k = 0; k < dim; ++k) go[k] += da * x[k];
        grad->objectness_bias() += da;
      }
      if (has_de) {
        auto gv = grad->box_weights();
        auto gc = grad->box_bias();
        for (std::size_t r = 0; r < 4; ++r) {
          gc[r] += de[r];
          for (std::size_t k = 0; k < dim; ++k) gv[r * dim + k] += de[r] * x[k];
        }
      }
    }
  }
  return total_loss(certain, soft, reduction);
}

}  // namespace

LossBreakdown objective(const DetectorParams& params, std::span<const TrainingExample> batch, Reduction reduction) {
  return run_objective(params, batch, reduction, nullptr);
}

ObjectiveResult objective_and_gradient(const DetectorParams& params, std::span<const TrainingExample> batch,
                                       Reduction reduction) {
  ObjectiveResult r{{}, DetectorParams(params.class_count(), params.feature_dim())};
  r.loss = run_objective(params, batch, reduction, &r.gradient);
  return r;
}

DetectorParams student_step(const DetectorParams& params, const DetectorParams& grad, double gamma) {
  if (!params.same_shape(grad)) throw Error(ErrorKind::InvalidArgument, "gradient shape differs from parameters");
  DetectorParams out = params;
  auto v = out.values();
  auto g = grad.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] -= gamma * g[k];
  return out;
}

DetectorParams ema_update(const DetectorParams& teacher, const DetectorParams& student, double alpha) {
  if (!teacher.same_shape(student)) throw Error(ErrorKind::InvalidArgument, "teacher and student shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidArgument, "EMA coefficient outside [0,1]");
  if (alpha == 0.0) return student;
  DetectorParams out = teacher;
  auto t = out.values();
  auto s = student.values();
  // Written as a step towards the student so that alpha = 1 and teacher ==
  // student leave the teacher bit-identical.
  for (std::size_t k = 0; k < t.size(); ++k) t[k] += (1.0 - alpha) * (s[k] - t[k]);
  return out;
}

}  // namespace rpl
