#include "rpl/self_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rpl/error.hpp"
#include "rpl/rng.hpp"

namespace rpl {

void TrainConfig::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw Error(ErrorKind::Config, std::string("train.") + field + ": " + why);
  };
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha", "must lie in [0,1]");
  if (!(gamma > 0.0)) fail("gamma", "must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("beta", "must lie in [0,1]");
  if (refresh_interval == 0) fail("refresh_interval", "must be positive");
  if (!(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0)) fail("nms_iou_threshold", "must lie in (0,1)");
  if (!(lone_box_mean_iou >= 0.0 && lone_box_mean_iou <= 1.0)) fail("lone_box_mean_iou", "must lie in [0,1]");
  if (!(objectness_floor >= 0.0 && objectness_floor <= 1.0)) fail("objectness_floor", "must lie in [0,1]");
  if (!(fallback_threshold >= 0.0 && fallback_threshold <= 1.0)) fail("fallback_threshold", "must lie in [0,1]");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (!(weak_noise_sigma >= 0.0)) fail("weak_noise_sigma", "must be >= 0");
  if (!(strong_noise_sigma >= weak_noise_sigma)) fail("strong_noise_sigma", "must be >= weak_noise_sigma");
  if (!(fixed_delta >= 0.0 && fixed_delta <= 1.0)) fail("fixed_delta", "must lie in [0,1]");
  if (!(targets.background_iou <= targets.foreground_iou)) fail("background_iou", "must not exceed foreground_iou");
}

namespace {

NmsOptions nms_options(const TrainConfig& config) { return {config.nms_iou_threshold, config.lone_box_mean_iou}; }

std::vector<std::vector<double>> noisy_view(std::span<const std::vector<double>> features, double sigma,
                                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out(features.begin(), features.end());
  for (auto& x : out) {
    for (auto& v : x) v += sigma * normal(rng);
  }
  return out;
}

std::vector<ScoredBox> survivors_of(std::span<const PseudoBox> boxes) {
  std::vector<ScoredBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(b.survivor);
  return out;
}

FrameDetections to_detections(std::span<const PseudoBox> boxes) {
  FrameDetections out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back({b.survivor.class_id, b.survivor.box, b.survivor.score});
  return out;
}

const char* failing_component(const LossBreakdown& l) {
  if (!std::isfinite(l.l_cls)) return "l_cls";
  if (!std::isfinite(l.l_reg)) return "l_reg";
  if (!std::isfinite(l.l_u)) return "l_u";
  return "l_sl";
}

}  // namespace

std::vector<PseudoBox> teacher_pseudo_boxes(const DetectorParams& teacher, const Frame& frame,
                                            std::span<const std::vector<double>> features,
                                            const ThresholdTable& table, const TrainConfig& config) {
  const auto predictions = predict(teacher, frame, features);
  const auto grouped = detect(predictions, config.objectness_floor, nms_options(config));
  return filter_by_threshold(grouped, table);
}

ThresholdTable refresh_thresholds(const DetectorParams& teacher, std::span<const Frame> estimation_frames,
                                  const ClassCatalog& catalog, const TrainConfig& config, std::uint64_t iteration) {
  if (!config.use_cate) return ThresholdTable::fixed(catalog.size(), config.fixed_delta, iteration);
  if (estimation_frames.empty()) throw Error(ErrorKind::InvalidArgument, "threshold estimation needs at least one frame");
  std::vector<ForegroundPrediction> foreground;
  for (const auto& frame : estimation_frames) {
    const auto grouped = detect(predict(teacher, frame), config.objectness_floor, nms_options(config));
    const auto survivors = survivors_of(grouped);
    const auto part = collect_foreground(std::span<const ScoredBox>(survivors), config.objectness_floor);
    foreground.insert(foreground.end(), part.begin(), part.end());
  }
  return estimate_thresholds(foreground, catalog, config.fallback_threshold, iteration);
}

std::vector<FrameDetections> detections(const DetectorParams& params, const Dataset& dataset, double objectness_floor,
                                        const NmsOptions& nms) {
  std::vector<FrameDetections> out;
  out.reserve(dataset.frames.size());
  for (const auto& frame : dataset.frames) out.push_back(to_detections(detect(predict(params, frame), objectness_floor, nms)));
  return out;
}

APResult evaluate_detector(const DetectorParams& params, const Dataset& labeled, double objectness_floor,
                           const NmsOptions& nms) {
  if (!labeled.ground_truth) throw Error(ErrorKind::InvalidArgument, "evaluation split has no ground truth");
  return mean_ap(detections(params, labeled, objectness_floor, nms), *labeled.ground_truth, labeled.catalog);
}

std::vector<FrameDetections> pseudo_label_detections(const DetectorParams& teacher, const Dataset& dataset,
                                                     const ThresholdTable& table, const TrainConfig& config) {
  std::vector<FrameDetections> out;
  out.reserve(dataset.frames.size());
  for (const auto& frame : dataset.frames)
    out.push_back(to_detections(teacher_pseudo_boxes(teacher, frame, frame.features, table, config)));
  return out;
}

TrainReport self_train(const TrainConfig& config, const Dataset& dataset, const DetectorParams& source_params,
                       const Evaluator& evaluator, const TrainHooks& hooks) {
  config.validate();
  if (!source_params.finite()) throw Error(ErrorKind::Numeric, "source parameters are not finite");
  if (source_params.class_count() != dataset.catalog.size())
    throw Error(ErrorKind::InvalidArgument, "detector class count differs from the dataset catalog");
  if (!dataset.frames.empty() && source_params.feature_dim() != dataset.feature_dim())
    throw Error(ErrorKind::InvalidArgument, "detector feature dimension differs from the dataset");

  TrainReport report;
  report.teacher = source_params;
  report.student = source_params;
  DetectorParams& teacher = report.teacher;
  DetectorParams& student = report.student;

  auto evaluate = [&](std::uint64_t iteration, const ThresholdTable* table) {
    EvaluationRecord rec;
    rec.iteration = iteration;
    rec.ap = evaluate_detector(teacher, *evaluator.test, config.objectness_floor, nms_options(config));
    if (evaluator.adaptation_truth && table) {
      rec.audit = audit_pseudo_labels(pseudo_label_detections(teacher, dataset, *table, config),
                                      *evaluator.adaptation_truth, dataset.catalog);
    }
    return rec;
  };

  if (config.iterations > 0 && dataset.frames.empty())
    throw Error(ErrorKind::InvalidArgument, "self-training needs at least one target frame");

  auto batch_rng = substream(config.rng_seed, "batch");
  auto weak_rng = substream(config.rng_seed, "noise-weak");
  auto strong_rng = substream(config.rng_seed, "noise-strong");
  auto estimate_rng = substream(config.rng_seed, "estimate");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.frames.empty() ? 0 : dataset.frames.size() - 1);

  std::vector<Frame> estimation_subset;
  auto estimation_frames = [&]() -> std::span<const Frame> {
    const std::size_t n = config.estimation_frames;
    if (n == 0 || n >= dataset.frames.size()) return dataset.frames;
    std::vector<std::size_t> idx(dataset.frames.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), estimate_rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    estimation_subset.clear();
    for (std::size_t i : idx) estimation_subset.push_back(dataset.frames[i]);
    return estimation_subset;
  };

  ThresholdTable table;
  bool have_table = false;
  const std::uint64_t eval_interval = config.effective_eval_interval();
  std::vector<TrainingExample> batch;

  for (std::uint64_t it = 0; it < config.iterations; ++it) {
    if (should_refresh(it, config.refresh_interval) || !have_table) {
      table = refresh_thresholds(teacher, estimation_frames(), dataset.catalog, config, it);
      have_table = true;
      report.thresholds.push_back(table);
    }
    if (evaluator.test && it % eval_interval == 0) report.evaluations.push_back(evaluate(it, &table));

    batch.clear();
    IterationLoss entry;
    entry.iteration = it;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Frame& frame = dataset.frames[pick(batch_rng)];
      auto weak = noisy_view(frame.features, config.weak_noise_sigma, weak_rng);
      auto strong = noisy_view(frame.features, config.strong_noise_sigma, strong_rng);

      FrameTrace trace;
      trace.iteration = it;
      trace.frame_id = frame.frame_id;
      trace.filtered = teacher_pseudo_boxes(teacher, frame, weak, table, config);
      if (config.use_lpla) {
        trace.labels = partition(trace.filtered, config.beta);
      } else {
        trace.labels.certain = trace.filtered;
        trace.labels.beta = config.beta;
      }
      trace.matches = match_proposals(trace.labels.uncertain, frame.frame_id);

      FrameTruth certain;
      certain.reserve(trace.labels.certain.size());
      for (const auto& p : trace.labels.certain) certain.push_back({p.survivor.class_id, p.survivor.box});
      entry.certain += certain.size();
      entry.uncertain += trace.labels.uncertain.size();

      batch.push_back({&frame, std::move(strong), build_targets(frame, certain, trace.matches, config.targets)});
      if (hooks.on_frame) hooks.on_frame(trace);
    }
    if (hooks.on_batch) hooks.on_batch(it, student, batch);

    const ObjectiveResult r = objective_and_gradient(student, batch, config.reduction);
    if (!r.loss.finite())
      throw Error(ErrorKind::Numeric, "iteration " + std::to_string(it) + ": non-finite " + failing_component(r.loss));
    entry.loss = r.loss;
    report.losses.push_back(entry);

    student = student_step(student, r.gradient, config.gamma);
    teacher = ema_update(teacher, student, config.alpha);
  }

  if (evaluator.test) {
    const ThresholdTable* audit_table = have_table ? &table : nullptr;
    report.final_evaluation = evaluate(config.iterations, audit_table);
  }
  return report;
}

}  // namespace rpl
