#pragma once

// File formats: JSON Lines frames, threshold tables, pseudo-label records,
// evaluation reports, training reports, detector checkpoints and the
// INI-style experiment config.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpl/assignment.hpp"
#include "rpl/core.hpp"
#include "rpl/detector.hpp"
#include "rpl/evaluation.hpp"
#include "rpl/self_train.hpp"
#include "rpl/synthetic.hpp"
#include "rpl/thresholding.hpp"

namespace rpl::io {

using nlohmann::json;

// ---- frames -------------------------------------------------------------
//
// One frame per line:
//   {"frame_id": "...",
//    "proposals": [{"box": [x1,y1,x2,y2], "objectness": o, "probs": [...], "features": [...]}],
//    "gt": [{"class": id, "box": [x1,y1,x2,y2]}]}
// "gt" is written only for datasets that carry ground truth. A frame may also
// hold "detections": [{"class": id, "box": [...], "score": s}] (eval input).

json frame_to_json(const Frame& frame, const FrameTruth* truth);
void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

// Class count comes from the catalog when given, else from the first
// distribution (or the largest class id) in the file.
Dataset read_dataset(std::istream& in, const std::optional<ClassCatalog>& catalog = std::nullopt);
Dataset read_dataset(const std::filesystem::path& path, const std::optional<ClassCatalog>& catalog = std::nullopt);

struct DetectionFile {
  std::vector<std::string> frame_ids;
  std::vector<FrameDetections> detections;
  std::vector<FrameTruth> truth;
  bool has_truth = false;
  std::size_t max_class = 0;
};

// Reads frame records ("detections", or failing that the argmax of
// "proposals", plus "gt") and flat per-box records {"frame_id", "class",
// "box", "score", ...} such as those written by the nms and assign commands.
// Lines sharing a frame_id are merged, in order of first appearance.
DetectionFile read_detections(const std::filesystem::path& path,
                              const std::optional<ClassCatalog>& catalog = std::nullopt);
void write_detections(std::ostream& out, const std::vector<std::string>& frame_ids,
                      const std::vector<FrameDetections>& detections);

// ---- records --------------------------------------------------------------

json box_to_json(const BBox& b);
BBox box_from_json(const json& j);
json table_to_json(const ThresholdTable& table, const ClassCatalog& catalog);
json pseudo_box_to_json(const PseudoBox& p, const std::string& frame_id);
// One JSONL record per label: frame_id, class, box, score, mean_iou, certain.
void write_label_records(std::ostream& out, const std::string& frame_id, const PseudoLabelSet& labels,
                         const ClassCatalog& catalog);
json ap_to_json(const APResult& ap, const ClassCatalog& catalog);
json audit_to_json(const BiasAudit& audit, const ClassCatalog& catalog);
json scene_to_json(const SceneConfig& scene);
json manifest_to_json(const SceneConfig& scene, const ClassCatalog& catalog);

// iteration,score,precision,recall rows for one class.
void write_pr_csv(std::ostream& out, const std::vector<PrPoint>& curve);

// ---- training report ----------------------------------------------------

void write_loss_csv(std::ostream& out, const TrainReport& report);
json report_summary(const TrainReport& report, const ClassCatalog& catalog, const TrainConfig& config);

// ---- checkpoints ----------------------------------------------------------
//
// A single JSON header line ({"format":"rpl-detector","version":1,"classes":C,
// "feature_dim":d,"count":N,"blocks":[...]}) followed by N little-endian
// IEEE-754 float64 values in block order.

void write_checkpoint(const std::filesystem::path& path, const DetectorParams& params);
DetectorParams read_checkpoint(const std::filesystem::path& path);

// ---- config -------------------------------------------------------------
//
// INI sections [scene], [pretrain] and [train] whose keys are the field
// names of SceneConfig, PretrainConfig and TrainConfig.

struct ExperimentConfig {
  SceneConfig scene;
  PretrainConfig pretrain;
  TrainConfig train;
};

ExperimentConfig read_config(const std::filesystem::path& path);
// Applies "section.key=value" overrides on top of `config`.
void apply_setting(ExperimentConfig& config, const std::string& section, const std::string& key,
                   const std::string& value);
void write_config(std::ostream& out, const ExperimentConfig& config);

std::string read_text(const std::filesystem::path& path);

}  // namespace rpl::io
