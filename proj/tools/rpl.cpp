// rpl: command-line front end for the refined pseudo-labeling pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rpl/assignment.hpp"
#include "rpl/error.hpp"
#include "rpl/evaluation.hpp"
#include "rpl/io.hpp"
#include "rpl/self_train.hpp"
#include "rpl/suppression.hpp"
#include "rpl/synthetic.hpp"
#include "rpl/thresholding.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigEnv = "RPL_CONFIG";

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

int fail(std::string_view kind, const std::string& message, int code) {
  std::cerr << "error kind=" << kind << " message=" << quote(message) << '\n';
  return code;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rpl::Error(rpl::ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw rpl::Error(rpl::ErrorKind::Io, "cannot create directory '" + dir.string() + "': " + ec.message());
}

// Options shared by every subcommand that reads an experiment config.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> settings;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "INI experiment config (default: $RPL_CONFIG)");
    app->add_option("--set", settings, "Override as section.key=value (repeatable)");
  }

  rpl::io::ExperimentConfig load() const {
    rpl::io::ExperimentConfig config;
    std::string file = path;
    if (file.empty()) {
      if (const char* env = std::getenv(kConfigEnv)) file = env;
    }
    if (!file.empty()) {
      if (!fs::exists(file)) throw rpl::Error(rpl::ErrorKind::Io, "config file '" + file + "' not found");
      config = rpl::io::read_config(file);
    }
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      const auto dot = s.find('.');
      if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw rpl::Error(rpl::ErrorKind::Config, "--set expects section.key=value, got '" + s + "'");
      rpl::io::apply_setting(config, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
    }
    return config;
  }
};

std::optional<rpl::ClassCatalog> catalog_from(const std::vector<std::string>& names) {
  if (names.empty()) return std::nullopt;
  return rpl::ClassCatalog(names);
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---- simulate -------------------------------------------------------------

struct SimulateCmd {
  ConfigOptions config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("simulate", "Generate the synthetic long-tailed benchmark");
    config.attach(app);
    app->add_option("--seed", seed, "Scene seed (overrides scene.seed)");
    app->add_option("--out", out_dir, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() const {
    auto cfg = config.load();
    if (seed) cfg.scene.seed = *seed;
    const auto data = rpl::generate_dataset(cfg.scene);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    rpl::io::write_dataset(dir / "source.jsonl", data.source());
    rpl::io::write_dataset(dir / "target_train.jsonl", data.target_train());
    rpl::io::write_dataset(dir / "target_test.jsonl", data.target_test());
    rpl::Dataset hidden;
    hidden.catalog = data.catalog();
    hidden.ground_truth = data.target_train_truth();
    for (const auto& f : data.target_train().frames) hidden.frames.push_back({f.frame_id, {}, {}});
    rpl::io::write_dataset(dir / "target_train_gt.jsonl", hidden);
    write_json(dir / "manifest.json", rpl::io::manifest_to_json(data.manifest(), data.catalog()));
  }
};

// Loads a simulate output directory back into memory.
rpl::SyntheticDataset load_data_dir(const fs::path& dir) {
  const json manifest = json::parse(rpl::io::read_text(dir / "manifest.json"));
  rpl::ClassCatalog catalog(manifest.at("classes").get<std::vector<std::string>>());
  rpl::io::ExperimentConfig cfg;
  for (const auto& [key, value] : manifest.at("scene").items())
    rpl::io::apply_setting(cfg, "scene", key, value.get<std::string>());
  auto source = rpl::io::read_dataset(dir / "source.jsonl", catalog);
  auto train = rpl::io::read_dataset(dir / "target_train.jsonl", catalog);
  auto test = rpl::io::read_dataset(dir / "target_test.jsonl", catalog);
  std::vector<rpl::FrameTruth> hidden;
  const fs::path gt_path = dir / "target_train_gt.jsonl";
  if (fs::exists(gt_path)) {
    auto gt = rpl::io::read_dataset(gt_path, catalog);
    if (gt.ground_truth) hidden = std::move(*gt.ground_truth);
  }
  return rpl::SyntheticDataset(cfg.scene, std::move(source), std::move(train), std::move(test), std::move(hidden));
}

// ---- pretrain -------------------------------------------------------------

struct PretrainCmd {
  ConfigOptions config;
  std::string data_dir;
  std::string out;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("pretrain", "Supervised source-domain pretraining");
    config.attach(app);
    app->add_option("--data", data_dir, "Directory written by `simulate` (default: generate from config)");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--lr", learning_rate, "Learning rate");
    app->add_option("--out", out, "Checkpoint path")->required();
    app->callback([this] { run(); });
  }

  void run() const {
    auto cfg = config.load();
    if (epochs) cfg.pretrain.epochs = *epochs;
    if (learning_rate) cfg.pretrain.learning_rate = *learning_rate;
    const auto data = data_dir.empty() ? rpl::generate_dataset(cfg.scene) : load_data_dir(data_dir);
    const auto params = rpl::pretrain_source(data.source(), cfg.pretrain);
    rpl::io::write_checkpoint(out, params);
    const auto src = rpl::evaluate_detector(params, data.source(), cfg.train.objectness_floor);
    const auto tgt = rpl::evaluate_detector(params, data.target_test(), cfg.train.objectness_floor);
    std::cout << json{{"source_map_50", src.map_50}, {"target_map_50", tgt.map_50}}.dump() << '\n';
  }
};

// ---- selftrain ------------------------------------------------------------

struct SelfTrainCmd {
  ConfigOptions config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> iterations;
  std::string data_dir;
  std::string source;
  std::string out_dir;
  bool no_cate = false;
  std::optional<double> fixed_delta;
  bool no_lpla = false;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("selftrain", "Run mean-teacher self-training with refined pseudo labels");
    config.attach(app);
    app->add_option("--seed", seed, "Training seed (overrides train.rng_seed)");
    app->add_option("--iterations", iterations, "Iterations (overrides train.iterations)");
    app->add_option("--data", data_dir, "Directory written by `simulate` (default: generate from config)");
    app->add_option("--source", source, "Source checkpoint (default: pretrain from config)");
    app->add_option("--out", out_dir, "Report directory")->required();
    auto* cate_off = app->add_flag("--no-cate", no_cate, "Filter every class at a fixed threshold");
    app->add_option("--fixed-delta", fixed_delta, "Threshold used with --no-cate")->needs(cate_off);
    app->add_flag("--no-lpla", no_lpla, "Treat every filtered pseudo label as certain");
    app->callback([this] { run(); });
  }

  void run() const {
    auto cfg = config.load();
    if (seed) cfg.train.rng_seed = *seed;
    if (iterations) cfg.train.iterations = *iterations;
    if (no_cate) cfg.train.use_cate = false;
    if (fixed_delta) cfg.train.fixed_delta = *fixed_delta;
    if (no_lpla) cfg.train.use_lpla = false;
    cfg.train.validate();

    const auto data = data_dir.empty() ? rpl::generate_dataset(cfg.scene) : load_data_dir(data_dir);
    const auto params = source.empty() ? rpl::pretrain_source(data.source(), cfg.pretrain) : rpl::io::read_checkpoint(source);

    rpl::Evaluator evaluator{&data.target_test(),
                             data.target_train_truth().empty() ? nullptr : &data.target_train_truth()};
    const auto report = rpl::self_train(cfg.train, data.target_train(), params, evaluator);

    const fs::path dir(out_dir);
    ensure_dir(dir);
    {
      auto csv = open_out(dir / "losses.csv");
      rpl::io::write_loss_csv(csv, report);
    }
    write_json(dir / "summary.json", rpl::io::report_summary(report, data.catalog(), cfg.train));
    rpl::io::write_checkpoint(dir / "teacher.ckpt", report.teacher);
    rpl::io::write_checkpoint(dir / "student.ckpt", report.student);
    {
      auto resolved = open_out(dir / "config.ini");
      rpl::io::write_config(resolved, cfg);
    }
    if (report.final_evaluation) {
      std::cout << json{{"final_map_50", report.final_evaluation->ap.map_50}}.dump() << '\n';
    }
  }
};

// ---- thresholds -----------------------------------------------------------

struct ThresholdsCmd {
  ConfigOptions config;
  std::string input;
  std::string params_path;
  std::vector<std::string> classes;
  std::optional<double> floor;
  std::optional<double> fallback;
  std::string out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("thresholds", "One-shot category-aware threshold estimate");
    config.attach(app);
    app->add_option("--input", input, "Frames JSONL")->required();
    app->add_option("--params", params_path, "Detector checkpoint; without it the stored proposal scores are used");
    app->add_option("--classes", classes, "Class names in id order")->delimiter(',');
    app->add_option("--objectness-floor", floor, "Minimum objectness of a foreground prediction");
    app->add_option("--fallback", fallback, "Threshold for classes without foreground predictions");
    app->add_option("--out", out, "Output JSON (default: stdout)");
    app->callback([this] { run(); });
  }

  void run() const {
    auto cfg = config.load();
    if (floor) cfg.train.objectness_floor = *floor;
    if (fallback) cfg.train.fallback_threshold = *fallback;
    const auto data = rpl::io::read_dataset(input, catalog_from(classes));
    rpl::ThresholdTable table;
    if (params_path.empty()) {
      const auto fg = rpl::collect_foreground(std::span<const rpl::Frame>(data.frames), cfg.train.objectness_floor);
      table = rpl::estimate_thresholds(fg, data.catalog, cfg.train.fallback_threshold);
    } else {
      cfg.train.use_cate = true;
      table = rpl::refresh_thresholds(rpl::io::read_checkpoint(params_path), data.frames, data.catalog, cfg.train, 0);
    }
    const json j = rpl::io::table_to_json(table, data.catalog);
    if (out.empty()) {
      std::cout << j.dump(2) << '\n';
    } else {
      write_json(out, j);
    }
  }
};

// ---- nms / assign ---------------------------------------------------------

// Pseudo boxes of one frame from its stored distributions or from a detector.
std::vector<rpl::PseudoBox> frame_pseudo_boxes(const rpl::Frame& frame, const rpl::DetectorParams* params,
                                               const rpl::TrainConfig& train) {
  const rpl::NmsOptions nms{train.nms_iou_threshold, train.lone_box_mean_iou};
  if (params) return rpl::detect(rpl::predict(*params, frame), train.objectness_floor, nms);
  return rpl::detect(frame.boxes, train.objectness_floor, nms);
}

struct NmsCmd {
  ConfigOptions config;
  std::string input;
  std::string params_path;
  std::optional<double> iou;
  std::optional<double> floor;
  std::optional<double> lone;
  std::string out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("nms", "Group NMS with mean-IoU per survivor");
    config.attach(app);
    app->add_option("--input", input, "Frames JSONL")->required();
    app->add_option("--params", params_path, "Detector checkpoint; without it the stored proposals are suppressed");
    app->add_option("--iou", iou, "Suppression IoU threshold");
    app->add_option("--objectness-floor", floor, "Drop proposals below this objectness first");
    app->add_option("--lone-mean-iou", lone, "Mean IoU given to survivors that suppressed nothing");
    app->add_option("--out", out, "Output JSONL (default: stdout)");
    app->callback([this] { run(); });
  }

  void run() const {
    auto cfg = config.load();
    if (iou) cfg.train.nms_iou_threshold = *iou;
    if (floor) cfg.train.objectness_floor = *floor;
    if (lone) cfg.train.lone_box_mean_iou = *lone;
    const auto data = rpl::io::read_dataset(input);
    std::optional<rpl::DetectorParams> params;
    if (!params_path.empty()) params = rpl::io::read_checkpoint(params_path);
    std::ofstream file;
    if (!out.empty()) file = open_out(out);
    std::ostream& os = out.empty() ? std::cout : file;
    for (const auto& frame : data.frames) {
      for (const auto& p : frame_pseudo_boxes(frame, params ? &*params : nullptr, cfg.train))
        os << rpl::io::pseudo_box_to_json(p, frame.frame_id).dump() << '\n';
    }
  }
};

struct AssignCmd {
  ConfigOptions config;
  std::string input;
  std::string params_path;
  std::string table_path;
  std::vector<std::string> classes;
  std::optional<double> fixed_delta;
  std::optional<double> beta;
  std::string out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("assign", "Threshold and split pseudo labels into certain/uncertain");
    config.attach(app);
    app->add_option("--input", input, "Frames JSONL")->required();
    app->add_option("--params", params_path, "Detector checkpoint; without it the stored proposals are used");
    app->add_option("--thresholds", table_path, "Threshold JSON written by `thresholds`");
    app->add_option("--fixed-delta", fixed_delta, "Use one threshold for every class");
    app->add_option("--classes", classes, "Class names in id order")->delimiter(',');
    app->add_option("--beta", beta, "Mean-IoU split point");
    app->add_option("--out", out, "Output JSONL (default: stdout)");
    app->callback([this] { run(); });
  }

  rpl::ThresholdTable load_table(const rpl::ClassCatalog& catalog, double fallback) const {
    const json j = json::parse(rpl::io::read_text(table_path));
    std::vector<std::optional<double>> deltas(catalog.size());
    for (const auto& [name, v] : j.at("thresholds").items()) {
      const auto idx = catalog.index_of(name);
      if (!idx) throw rpl::Error(rpl::ErrorKind::Malformed, "threshold file names unknown class '" + name + "'");
      if (!v.is_null()) deltas[*idx] = v.get<double>();
    }
    std::vector<rpl::CategoryStats> stats(catalog.size());
    for (std::size_t c = 0; c < stats.size(); ++c) stats[c].class_id = c;
    return rpl::ThresholdTable(std::move(deltas), std::move(stats), j.value("n_f", std::size_t{0}),
                               j.value("iteration", std::uint64_t{0}), j.value("fallback", fallback));
  }

  void run() const {
    auto cfg = config.load();
    if (beta) cfg.train.beta = *beta;
    if (!table_path.empty() && fixed_delta) throw rpl::Error(rpl::ErrorKind::Config, "--thresholds and --fixed-delta are exclusive");
    const auto data = rpl::io::read_dataset(input, catalog_from(classes));
    std::optional<rpl::DetectorParams> params;
    if (!params_path.empty()) params = rpl::io::read_checkpoint(params_path);

    std::vector<std::vector<rpl::PseudoBox>> grouped;
    for (const auto& frame : data.frames) grouped.push_back(frame_pseudo_boxes(frame, params ? &*params : nullptr, cfg.train));

    rpl::ThresholdTable table;
    if (fixed_delta) {
      table = rpl::ThresholdTable::fixed(data.catalog.size(), *fixed_delta);
    } else if (!table_path.empty()) {
      table = load_table(data.catalog, cfg.train.fallback_threshold);
    } else {
      std::vector<rpl::ForegroundPrediction> fg;
      for (const auto& g : grouped) {
        for (const auto& p : g) fg.push_back({p.survivor.class_id, p.survivor.score});
      }
      table = rpl::estimate_thresholds(fg, data.catalog, cfg.train.fallback_threshold);
    }

    std::ofstream file;
    if (!out.empty()) file = open_out(out);
    std::ostream& os = out.empty() ? std::cout : file;
    for (std::size_t i = 0; i < data.frames.size(); ++i) {
      const auto labels = rpl::partition(rpl::filter_by_threshold(grouped[i], table), cfg.train.beta);
      rpl::io::write_label_records(os, data.frames[i].frame_id, labels, data.catalog);
    }
  }
};

// ---- eval -----------------------------------------------------------------

struct EvalCmd {
  std::string predictions;
  std::string truth;
  std::vector<std::string> classes;
  double iou = rpl::kDefaultMatchIou;
  std::string out_dir;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "mAP@0.5, per-class AP, bias audit and PR curves");
    app->add_option("--predictions", predictions, "Detections JSONL")->required();
    app->add_option("--gt", truth, "Ground-truth JSONL")->required();
    app->add_option("--classes", classes, "Class names in id order")->delimiter(',');
    app->add_option("--iou", iou, "Match IoU threshold");
    app->add_option("--out", out_dir, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() const {
    const auto names = catalog_from(classes);
    const auto pred = rpl::io::read_detections(predictions, names);
    const auto gt = rpl::io::read_detections(truth, names);
    if (!gt.has_truth) throw rpl::Error(rpl::ErrorKind::Malformed, "'" + truth + "' holds no \"gt\" records");

    std::map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < gt.frame_ids.size(); ++i) where[gt.frame_ids[i]] = i;
    std::vector<rpl::FrameDetections> aligned(gt.frame_ids.size());
    for (std::size_t i = 0; i < pred.frame_ids.size(); ++i) {
      auto it = where.find(pred.frame_ids[i]);
      if (it == where.end()) throw rpl::Error(rpl::ErrorKind::Malformed, "prediction frame '" + pred.frame_ids[i] + "' has no ground truth");
      aligned[it->second] = pred.detections[i];
    }

    const rpl::ClassCatalog catalog = classes.empty()
                                          ? rpl::ClassCatalog::numbered(std::max(pred.max_class, gt.max_class) + 1)
                                          : rpl::ClassCatalog(classes);
    const auto ap = rpl::mean_ap(aligned, gt.truth, catalog, iou);
    const auto audit = rpl::audit_pseudo_labels(aligned, gt.truth, catalog, iou);

    const fs::path dir(out_dir);
    ensure_dir(dir);
    json j = rpl::io::ap_to_json(ap, catalog);
    j["audit"] = rpl::io::audit_to_json(audit, catalog);
    j["iou_threshold"] = iou;
    write_json(dir / "eval.json", j);
    for (std::size_t c = 0; c < catalog.size(); ++c) {
      auto csv = open_out(dir / ("pr_" + catalog.name(c) + ".csv"));
      rpl::io::write_pr_csv(csv, rpl::pr_curve(rpl::match_class(aligned, gt.truth, c, iou)));
    }
    std::cout << json{{"map_50", ap.map_50}}.dump() << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refined pseudo labeling for source-free domain-adaptive detection"};
  app.require_subcommand(1);

  SimulateCmd simulate;
  PretrainCmd pretrain;
  SelfTrainCmd selftrain;
  ThresholdsCmd thresholds;
  NmsCmd nms;
  AssignCmd assign;
  EvalCmd eval;
  simulate.attach(app);
  pretrain.attach(app);
  selftrain.attach(app);
  thresholds.attach(app);
  nms.attach(app);
  assign.attach(app);
  eval.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  } catch (const rpl::Error& e) {
    return fail(rpl::to_string(e.kind()), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
