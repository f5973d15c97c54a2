#include "rpl/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rpl/error.hpp"

namespace rpl::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json dispersion_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return "inf";
  return *v;
}

template <typename F>
auto with_context(std::size_t line, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Malformed, "line " + std::to_string(line) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), "line " + std::to_string(line) + ": " + e.what());
  }
}

std::size_t class_from_json(const json& j, const std::optional<ClassCatalog>& catalog) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (catalog) {
      auto idx = catalog->index_of(name);
      if (!idx) throw Error(ErrorKind::Malformed, "unknown class '" + name + "'");
      return *idx;
    }
    // Without a catalog only the default "class<N>" names are understood.
    const std::string digits = name.rfind("class", 0) == 0 ? name.substr(5) : std::string();
    if (digits.empty() || digits.size() > 9 || digits.find_first_not_of("0123456789") != std::string::npos)
      throw Error(ErrorKind::Malformed, "class name '" + name + "' needs a catalog");
    return std::stoul(digits);
  }
  if (!j.is_number_integer() || j.get<long long>() < 0) throw Error(ErrorKind::Malformed, "class must be a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json box_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::Malformed, "box must be [x_min, y_min, x_max, y_max]");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw Error(ErrorKind::Malformed, "box violates x_min <= x_max, y_min <= y_max");
  return b;
}

json frame_to_json(const Frame& frame, const FrameTruth* truth) {
  json proposals = json::array();
  for (std::size_t i = 0; i < frame.boxes.size(); ++i) {
    const ScoredBox& b = frame.boxes[i];
    json p;
    p["box"] = box_to_json(b.box);
    p["objectness"] = b.dist.objectness;
    p["probs"] = b.dist.probs;
    p["features"] = i < frame.features.size() ? json(frame.features[i]) : json::array();
    proposals.push_back(std::move(p));
  }
  json j;
  j["frame_id"] = frame.frame_id;
  j["proposals"] = std::move(proposals);
  if (truth) {
    json gt = json::array();
    for (const auto& g : *truth) gt.push_back({{"class", g.class_id}, {"box", box_to_json(g.box)}});
    j["gt"] = std::move(gt);
  }
  return j;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    const FrameTruth* truth = dataset.ground_truth ? &(*dataset.ground_truth)[i] : nullptr;
    out << frame_to_json(dataset.frames[i], truth).dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  write_dataset(out, dataset);
}

Dataset read_dataset(std::istream& in, const std::optional<ClassCatalog>& catalog) {
  std::vector<Frame> frames;
  std::vector<std::optional<FrameTruth>> truths;
  std::size_t classes = catalog ? catalog->size() : 0;
  std::size_t max_class = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    with_context(line_no, [&] {
      const json j = json::parse(line);
      Frame f;
      f.frame_id = j.at("frame_id").get<std::string>();
      if (j.contains("proposals")) {
        for (const auto& p : j.at("proposals")) {
          ClassDistribution dist;
          dist.probs = p.at("probs").get<std::vector<double>>();
          dist.objectness = p.value("objectness", 1.0);
          if (classes == 0) classes = dist.probs.size();
          if (dist.probs.size() != classes) throw Error(ErrorKind::Malformed, "probs length differs from class count");
          dist.validate();
          const std::size_t index = f.boxes.size();
          f.boxes.push_back(ScoredBox::from_distribution(box_from_json(p.at("box")), std::move(dist), index));
          f.features.push_back(p.value("features", std::vector<double>{}));
        }
      }
      std::optional<FrameTruth> truth;
      if (j.contains("gt")) {
        truth.emplace();
        for (const auto& g : j.at("gt")) {
          const std::size_t c = class_from_json(g.at("class"), catalog);
          max_class = std::max(max_class, c);
          truth->push_back({c, box_from_json(g.at("box"))});
        }
      }
      frames.push_back(std::move(f));
      truths.push_back(std::move(truth));
    });
  }

  Dataset d;
  if (catalog) {
    d.catalog = *catalog;
  } else {
    d.catalog = ClassCatalog::numbered(std::max(classes, max_class + 1));
  }
  const bool any_truth = std::any_of(truths.begin(), truths.end(), [](const auto& t) { return t.has_value(); });
  if (any_truth) {
    d.ground_truth.emplace();
    for (auto& t : truths) d.ground_truth->push_back(t.value_or(FrameTruth{}));
  }
  d.frames = std::move(frames);
  d.validate();
  return d;
}

Dataset read_dataset(const std::filesystem::path& path, const std::optional<ClassCatalog>& catalog) {
  auto in = open_in(path);
  try {
    return read_dataset(in, catalog);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

DetectionFile read_detections(const std::filesystem::path& path, const std::optional<ClassCatalog>& catalog) {
  auto in = open_in(path);
  DetectionFile out;
  std::map<std::string, std::size_t> index;
  auto frame = [&](const std::string& id) {
    auto [it, fresh] = index.try_emplace(id, out.frame_ids.size());
    if (fresh) {
      out.frame_ids.push_back(id);
      out.detections.emplace_back();
      out.truth.emplace_back();
    }
    return it->second;
  };
  auto detection = [&](const json& d) {
    Detection det;
    det.class_id = class_from_json(d.at("class"), catalog);
    det.box = box_from_json(d.at("box"));
    det.score = d.at("score").get<double>();
    out.max_class = std::max(out.max_class, det.class_id);
    return det;
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    with_context(line_no, [&] {
      const json j = json::parse(line);
      const std::size_t f = frame(j.at("frame_id").get<std::string>());
      FrameDetections& dets = out.detections[f];
      if (j.contains("detections")) {
        for (const auto& d : j.at("detections")) dets.push_back(detection(d));
      } else if (j.contains("proposals")) {
        for (const auto& p : j.at("proposals")) {
          ClassDistribution dist{p.at("probs").get<std::vector<double>>(), p.value("objectness", 1.0)};
          const std::size_t c = dist.argmax();
          out.max_class = std::max(out.max_class, dist.probs.size() - 1);
          dets.push_back({c, box_from_json(p.at("box")), dist.probs[c]});
        }
      } else if (j.contains("box")) {
        dets.push_back(detection(j));
      }
      if (j.contains("gt")) {
        out.has_truth = true;
        for (const auto& g : j.at("gt")) {
          const std::size_t c = class_from_json(g.at("class"), catalog);
          out.max_class = std::max(out.max_class, c);
          out.truth[f].push_back({c, box_from_json(g.at("box"))});
        }
      }
    });
  }
  return out;
}

void write_detections(std::ostream& out, const std::vector<std::string>& frame_ids,
                      const std::vector<FrameDetections>& detections) {
  for (std::size_t i = 0; i < frame_ids.size(); ++i) {
    json dets = json::array();
    for (const auto& d : detections[i]) dets.push_back({{"class", d.class_id}, {"box", box_to_json(d.box)}, {"score", d.score}});
    out << json{{"frame_id", frame_ids[i]}, {"detections", std::move(dets)}}.dump() << '\n';
  }
}

json table_to_json(const ThresholdTable& table, const ClassCatalog& catalog) {
  json thresholds = json::object();
  json counts = json::object();
  for (std::size_t c = 0; c < table.class_count(); ++c) {
    const std::string& name = catalog.name(c);
    thresholds[name] = optional_number(table.delta(c));
    counts[name] = c < table.stats().size() ? table.stats()[c].count : 0;
  }
  return {{"thresholds", std::move(thresholds)},
          {"counts", std::move(counts)},
          {"n_f", table.foreground_count()},
          {"iteration", table.estimated_at()},
          {"fallback", table.fallback()}};
}

json pseudo_box_to_json(const PseudoBox& p, const std::string& frame_id) {
  json group = json::array();
  for (const auto& s : p.suppressed) {
    group.push_back({{"box", box_to_json(s.box)}, {"score", s.score}, {"proposal", s.proposal}});
  }
  return {{"frame_id", frame_id},
          {"class", p.survivor.class_id},
          {"box", box_to_json(p.survivor.box)},
          {"score", p.survivor.score},
          {"proposal", p.survivor.proposal},
          {"mean_iou", p.mean_iou},
          {"suppressed", std::move(group)}};
}

void write_label_records(std::ostream& out, const std::string& frame_id, const PseudoLabelSet& labels,
                         const ClassCatalog& catalog) {
  auto emit = [&](const PseudoBox& p, bool certain) {
    json j{{"frame_id", frame_id},
           {"class", catalog.name(p.survivor.class_id)},
           {"box", box_to_json(p.survivor.box)},
           {"score", p.survivor.score},
           {"mean_iou", p.mean_iou},
           {"certain", certain}};
    out << j.dump() << '\n';
  };
  for (const auto& p : labels.certain) emit(p, true);
  for (const auto& p : labels.uncertain) emit(p, false);
}

json ap_to_json(const APResult& ap, const ClassCatalog& catalog) {
  json per_class = json::object();
  json counts = json::object();
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    per_class[catalog.name(c)] = optional_number(ap.per_class_ap[c]);
    counts[catalog.name(c)] = {{"tp", ap.counts[c].true_positives},
                               {"fp", ap.counts[c].false_positives},
                               {"fn", ap.counts[c].false_negatives}};
  }
  return {{"map_50", ap.map_50}, {"per_class_ap", std::move(per_class)}, {"counts", std::move(counts)}};
}

json audit_to_json(const BiasAudit& audit, const ClassCatalog& catalog) {
  json classes = json::object();
  for (std::size_t c = 0; c < audit.classes.size(); ++c) {
    const ClassAudit& a = audit.classes[c];
    classes[catalog.name(c)] = {{"pseudo", a.pseudo_count}, {"gt", a.ground_truth_count},
                                {"ratio", optional_number(a.ratio)}, {"recall", optional_number(a.recall)},
                                {"tp", a.true_positives},   {"fp", a.false_positives},
                                {"fn", a.false_negatives}};
  }
  return {{"classes", std::move(classes)}, {"dispersion", dispersion_json(audit.dispersion)}};
}

void write_pr_csv(std::ostream& out, const std::vector<PrPoint>& curve) {
  out << "rank,score,precision,recall\n";
  out.precision(17);
  for (std::size_t k = 0; k < curve.size(); ++k)
    out << k + 1 << ',' << curve[k].score << ',' << curve[k].precision << ',' << curve[k].recall << '\n';
}

void write_loss_csv(std::ostream& out, const TrainReport& report) {
  out << "iteration,l_cls,l_reg,l_det,l_u,l_sl,certain,uncertain\n";
  out.precision(17);
  for (const auto& e : report.losses) {
    out << e.iteration << ',' << e.loss.l_cls << ',' << e.loss.l_reg << ',' << e.loss.l_det << ',' << e.loss.l_u
        << ',' << e.loss.l_sl << ',' << e.certain << ',' << e.uncertain << '\n';
  }
}

namespace {

json evaluation_to_json(const EvaluationRecord& rec, const ClassCatalog& catalog) {
  json j = ap_to_json(rec.ap, catalog);
  j["iteration"] = rec.iteration;
  if (rec.audit) j["audit"] = audit_to_json(*rec.audit, catalog);
  return j;
}

}  // namespace

json report_summary(const TrainReport& report, const ClassCatalog& catalog, const TrainConfig& config) {
  json j;
  j["iterations"] = config.iterations;
  j["arm"] = {{"cate", config.use_cate}, {"fixed_delta", config.use_cate ? json(nullptr) : json(config.fixed_delta)},
              {"lpla", config.use_lpla}};
  if (report.final_evaluation) {
    j["final"] = evaluation_to_json(*report.final_evaluation, catalog);
  } else {
    j["final"] = nullptr;
  }
  json evals = json::array();
  for (const auto& e : report.evaluations) evals.push_back(evaluation_to_json(e, catalog));
  j["evaluations"] = std::move(evals);
  json history = json::array();
  for (const auto& t : report.thresholds) history.push_back(table_to_json(t, catalog));
  j["threshold_history"] = std::move(history);
  return j;
}

void write_checkpoint(const std::filesystem::path& path, const DetectorParams& params) {
  json blocks = json::array();
  for (const auto& b : params.layout()) blocks.push_back({{"name", b.name}, {"shape", {b.rows, b.cols}}});
  const json header{{"format", "rpl-detector"}, {"version", 1},
                    {"classes", params.class_count()}, {"feature_dim", params.feature_dim()},
                    {"count", params.size()}, {"blocks", std::move(blocks)}};
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << header.dump() << '\n';
  for (double v : params.values()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

DetectorParams read_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string header_line;
  std::getline(in, header_line);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Malformed, path.string() + ": bad checkpoint header: " + e.what());
  }
  if (header.value("format", "") != "rpl-detector")
    throw Error(ErrorKind::Malformed, path.string() + ": not a detector checkpoint");
  const std::size_t classes = header.at("classes").get<std::size_t>();
  const std::size_t dim = header.at("feature_dim").get<std::size_t>();
  const std::size_t count = header.at("count").get<std::size_t>();
  if (count != DetectorParams::size_for(classes, dim))
    throw Error(ErrorKind::Malformed, path.string() + ": checkpoint count does not match its shape");
  std::vector<double> values(count);
  for (auto& v : values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorKind::Malformed, path.string() + ": truncated checkpoint");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    v = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::Malformed, path.string() + ": trailing bytes in checkpoint");
  return DetectorParams(classes, dim, std::move(values));
}

// ---- config -------------------------------------------------------------

namespace {

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorKind::Config, key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v == "never") return kNeverRefresh;
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v[0] != '-') out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorKind::Config, key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::Config, key + ": expected true/false, got '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using FieldMap = std::map<std::string, Field>;

template <typename T, typename Proj>
Field real_field(Proj proj) {
  return {[proj](ExperimentConfig& c, const std::string& k, const std::string& v) { proj(c) = static_cast<T>(parse_double(k, v)); },
          [proj](const ExperimentConfig& c) {
            ExperimentConfig copy = c;
            return fmt_double(proj(copy));
          }};
}

template <typename T, typename Proj>
Field uint_field(Proj proj) {
  return {[proj](ExperimentConfig& c, const std::string& k, const std::string& v) { proj(c) = static_cast<T>(parse_uint(k, v)); },
          [proj](const ExperimentConfig& c) {
            ExperimentConfig copy = c;
            const auto value = static_cast<std::uint64_t>(proj(copy));
            return value == kNeverRefresh ? std::string("never") : std::to_string(value);
          }};
}

template <typename Proj>
Field bool_field(Proj proj) {
  return {[proj](ExperimentConfig& c, const std::string& k, const std::string& v) { proj(c) = parse_bool(k, v); },
          [proj](const ExperimentConfig& c) {
            ExperimentConfig copy = c;
            return std::string(proj(copy) ? "true" : "false");
          }};
}

#define RPL_REAL(section, name) {#name, real_field<double>([](ExperimentConfig& c) -> auto& { return c.section.name; })}
#define RPL_UINT(section, name)                                                                  \
  {#name, uint_field<std::remove_reference_t<decltype(std::declval<ExperimentConfig&>().section.name)>>( \
              [](ExperimentConfig& c) -> auto& { return c.section.name; })}
#define RPL_BOOL(section, name) {#name, bool_field([](ExperimentConfig& c) -> auto& { return c.section.name; })}

const std::map<std::string, FieldMap>& fields() {
  static const std::map<std::string, FieldMap> table = {
      {"scene",
       {RPL_UINT(scene, class_count), RPL_REAL(scene, class_skew), RPL_REAL(scene, scene_width),
        RPL_REAL(scene, scene_height), RPL_UINT(scene, objects_min), RPL_UINT(scene, objects_max),
        RPL_REAL(scene, box_size_mean), RPL_REAL(scene, box_size_spread), RPL_REAL(scene, class_size_spread),
        RPL_UINT(scene, proposals_per_object), RPL_REAL(scene, proposal_jitter), RPL_REAL(scene, hard_fraction),
        RPL_REAL(scene, hard_jitter_scale), RPL_UINT(scene, background_proposals), RPL_UINT(scene, embed_dim),
        RPL_REAL(scene, prototype_scale), RPL_REAL(scene, foreground_scale), RPL_REAL(scene, object_noise),
        RPL_REAL(scene, feature_noise), RPL_REAL(scene, offset_scale),
        RPL_REAL(scene, offset_noise), RPL_REAL(scene, hard_offset_noise), RPL_REAL(scene, domain_shift),
        RPL_REAL(scene, target_extra_noise), RPL_UINT(scene, source_frames), RPL_UINT(scene, target_train_frames),
        RPL_UINT(scene, target_test_frames), RPL_UINT(scene, seed)}},
      {"pretrain",
       {RPL_UINT(pretrain, epochs), RPL_REAL(pretrain, learning_rate), RPL_UINT(pretrain, batch_size),
        RPL_REAL(pretrain, init_scale), RPL_UINT(pretrain, seed),
        {"foreground_iou", real_field<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.targets.foreground_iou; })},
        {"background_iou", real_field<double>([](ExperimentConfig& c) -> auto& { return c.pretrain.targets.background_iou; })}}},
      {"train",
       {RPL_REAL(train, alpha), RPL_REAL(train, gamma), RPL_REAL(train, beta), RPL_UINT(train, refresh_interval),
        RPL_REAL(train, nms_iou_threshold), RPL_REAL(train, lone_box_mean_iou), RPL_REAL(train, objectness_floor),
        RPL_REAL(train, fallback_threshold), RPL_UINT(train, iterations), RPL_UINT(train, batch_size),
        RPL_UINT(train, rng_seed), RPL_REAL(train, weak_noise_sigma), RPL_REAL(train, strong_noise_sigma),
        RPL_BOOL(train, use_cate), RPL_REAL(train, fixed_delta), RPL_BOOL(train, use_lpla),
        RPL_UINT(train, eval_interval), RPL_UINT(train, estimation_frames),
        {"foreground_iou", real_field<double>([](ExperimentConfig& c) -> auto& { return c.train.targets.foreground_iou; })},
        {"background_iou", real_field<double>([](ExperimentConfig& c) -> auto& { return c.train.targets.background_iou; })},
        {"reduction",
         {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if (v == "mean") c.train.reduction = Reduction::Mean;
            else if (v == "sum") c.train.reduction = Reduction::Sum;
            else throw Error(ErrorKind::Config, k + ": expected mean or sum, got '" + v + "'");
          },
          [](const ExperimentConfig& c) { return std::string(c.train.reduction == Reduction::Mean ? "mean" : "sum"); }}}}},
  };
  return table;
}

#undef RPL_REAL
#undef RPL_UINT
#undef RPL_BOOL

}  // namespace

void apply_setting(ExperimentConfig& config, const std::string& section, const std::string& key,
                   const std::string& value) {
  const auto& all = fields();
  auto s = all.find(section);
  if (s == all.end()) throw Error(ErrorKind::Config, "unknown config section '" + section + "'");
  auto f = s->second.find(key);
  if (f == s->second.end()) throw Error(ErrorKind::Config, "unknown config key '" + section + "." + key + "'");
  f->second.set(config, section + "." + key, value);
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorKind::Config, "top-level key '" + section + "' outside a section");
    for (const auto& [key, value] : body) apply_setting(config, section, key, value.data());
  }
  return config;
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  for (const char* section : {"scene", "pretrain", "train"}) {
    out << '[' << section << "]\n";
    for (const auto& [key, field] : fields().at(section)) out << key << " = " << field.get(config) << '\n';
    out << '\n';
  }
}

json scene_to_json(const SceneConfig& scene) {
  ExperimentConfig c;
  c.scene = scene;
  json j = json::object();
  for (const auto& [key, field] : fields().at("scene")) j[key] = field.get(c);
  return j;
}

json manifest_to_json(const SceneConfig& scene, const ClassCatalog& catalog) {
  return {{"classes", catalog.names()},
          {"feature_dim", scene.feature_dim()},
          {"class_weights", class_weights(scene)},
          {"scene", scene_to_json(scene)}};
}

}  // namespace rpl::io
