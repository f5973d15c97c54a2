#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <unistd.h>
#include <sstream>

#include "rpl/io.hpp"
#include "support.hpp"

using namespace rpl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("rpl_io_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

SyntheticDataset tiny() {
  SceneConfig s;
  s.source_frames = 6;
  s.target_train_frames = 4;
  s.target_test_frames = 4;
  return generate_dataset(s);
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("datasets survive a JSONL round trip") {
    const auto d = tiny();
    for (const Dataset* split : {&d.source(), &d.target_train()}) {
      std::stringstream ss;
      io::write_dataset(ss, *split);
      const Dataset back = io::read_dataset(ss, split->catalog);
      CHECK(back == *split);
    }
    std::stringstream ss;
    io::write_dataset(ss, d.target_train());
    CHECK(ss.str().find("\"gt\"") == std::string::npos);
  }

  TEST_CASE("class count is inferred without a catalog") {
    std::stringstream ss(
        R"({"frame_id":"a","proposals":[{"box":[0,0,1,1],"objectness":0.9,"probs":[0.5,0.25,0.25]}]})"
        "\n\n"
        R"({"frame_id":"b","gt":[{"class":2,"box":[0,0,2,2]}]})"
        "\n");
    const Dataset d = io::read_dataset(ss);
    CHECK(d.catalog.size() == 3);
    REQUIRE(d.ground_truth.has_value());
    CHECK((*d.ground_truth)[0].empty());
    CHECK((*d.ground_truth)[1][0].class_id == 2);
    CHECK(d.frames[0].boxes[0].class_id == 0);
    CHECK(d.frames[0].boxes[0].score == 0.5);

    std::stringstream gt_only(R"({"frame_id":"a","gt":[{"class":4,"box":[0,0,1,1]}]})");
    CHECK(io::read_dataset(gt_only).catalog.size() == 5);
  }

  TEST_CASE("malformed frames report the line") {
    auto fails = [](const std::string& text) {
      std::stringstream ss(text);
      try {
        io::read_dataset(ss);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Malformed);
        return std::string(e.what());
      }
      FAIL("accepted: " << text);
      return std::string();
    };
    CHECK(fails("{\"frame_id\":\"a\"}\nnot json\n").find("line 2") != std::string::npos);
    fails(R"({"frame_id":"a","proposals":[{"box":[0,0,1],"probs":[1.0]}]})");
    fails(R"({"frame_id":"a","proposals":[{"box":[2,0,1,1],"probs":[1.0]}]})");
    fails(R"({"frame_id":"a","proposals":[{"box":[0,0,1,1],"probs":[0.7,0.7]}]})");
    fails(R"({"frame_id":"a","gt":[{"class":-1,"box":[0,0,1,1]}]})");
    fails("{\"frame_id\":\"a\",\"proposals\":[{\"box\":[0,0,1,1],\"probs\":[1.0]}]}\n"
          "{\"frame_id\":\"b\",\"proposals\":[{\"box\":[0,0,1,1],\"probs\":[0.5,0.5]}]}");
    CHECK_ERROR_KIND(io::read_dataset(fs::path("/nonexistent/rpl.jsonl")), ErrorKind::Io);
  }

  TEST_CASE("checkpoints round-trip bit for bit") {
    TempDir dir;
    std::mt19937_64 rng(1);
    DetectorParams p(4, 7);
    std::normal_distribution<double> normal;
    for (auto& v : p.values()) v = normal(rng) * 1e-3;
    p.values()[0] = -0.0;
    p.values()[1] = 1e-310;
    io::write_checkpoint(dir / "a.ckpt", p);
    const auto back = io::read_checkpoint(dir / "a.ckpt");
    CHECK(back == p);
    CHECK(std::signbit(back.values()[0]));

    const std::string bytes = io::read_text(dir / "a.ckpt");
    write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() - 3));
    CHECK_ERROR_KIND(io::read_checkpoint(dir / "short.ckpt"), ErrorKind::Malformed);
    write_file(dir / "long.ckpt", bytes + "x");
    CHECK_ERROR_KIND(io::read_checkpoint(dir / "long.ckpt"), ErrorKind::Malformed);
    write_file(dir / "other.ckpt", "{\"format\":\"something\"}\n");
    CHECK_ERROR_KIND(io::read_checkpoint(dir / "other.ckpt"), ErrorKind::Malformed);
  }

  TEST_CASE("config files and overrides") {
    TempDir dir;
    write_file(dir / "a.ini",
               "[scene]\nclass_count = 4\nclass_skew = 0.5\n\n[train]\nbeta = 0.7\nuse_lpla = false\n"
               "reduction = sum\nrefresh_interval = 250\n");
    auto cfg = io::read_config(dir / "a.ini");
    CHECK(cfg.scene.class_count == 4);
    CHECK(cfg.scene.class_skew == 0.5);
    CHECK(cfg.train.beta == 0.7);
    CHECK_FALSE(cfg.train.use_lpla);
    CHECK(cfg.train.reduction == Reduction::Sum);
    CHECK(cfg.train.refresh_interval == 250);
    CHECK(cfg.pretrain.epochs == PretrainConfig{}.epochs);

    io::apply_setting(cfg, "train", "gamma", "0.02");
    CHECK(cfg.train.gamma == 0.02);
    CHECK_ERROR_KIND(io::apply_setting(cfg, "train", "gama", "1"), ErrorKind::Config);
    CHECK_ERROR_KIND(io::apply_setting(cfg, "model", "gamma", "1"), ErrorKind::Config);
    CHECK_ERROR_KIND(io::apply_setting(cfg, "train", "gamma", "fast"), ErrorKind::Config);
    CHECK_ERROR_KIND(io::apply_setting(cfg, "train", "iterations", "-3"), ErrorKind::Config);
    CHECK_ERROR_KIND(io::apply_setting(cfg, "train", "use_cate", "maybe"), ErrorKind::Config);

    // Written configs read back to the same values.
    std::ostringstream first;
    io::write_config(first, cfg);
    write_file(dir / "b.ini", first.str());
    std::ostringstream second;
    io::write_config(second, io::read_config(dir / "b.ini"));
    CHECK(first.str() == second.str());

    write_file(dir / "bad.ini", "[train]\nunknown_knob = 1\n");
    CHECK_ERROR_KIND(io::read_config(dir / "bad.ini"), ErrorKind::Config);
    write_file(dir / "top.ini", "beta = 1\n");
    CHECK_ERROR_KIND(io::read_config(dir / "top.ini"), ErrorKind::Config);
  }

  TEST_CASE("threshold tables serialize absent classes as null") {
    const ClassCatalog cat({"car", "bus"});
    const auto fixed = io::table_to_json(ThresholdTable::fixed(2, 0.7), cat);
    CHECK(fixed["thresholds"]["car"].is_null());
    CHECK(fixed["fallback"] == 0.7);

    const auto est = estimate_thresholds(std::vector<ForegroundPrediction>{{0, 0.9}, {0, 0.4}}, cat);
    const auto j = io::table_to_json(est, cat);
    CHECK(j["thresholds"]["car"] == 0.9);
    CHECK(j["thresholds"]["bus"].is_null());
    CHECK(j["counts"]["car"] == 2);
    CHECK(j["n_f"] == 2);
  }

  TEST_CASE("audit JSON writes an infinite dispersion as a string") {
    BiasAudit a;
    a.classes.resize(1);
    a.dispersion = std::numeric_limits<double>::infinity();
    CHECK(io::audit_to_json(a, ClassCatalog::numbered(1))["dispersion"] == "inf");
    a.dispersion.reset();
    CHECK(io::audit_to_json(a, ClassCatalog::numbered(1))["dispersion"].is_null());
  }

  TEST_CASE("detections are read from frame records and from flat per-box records") {
    TempDir dir;
    write_file(dir / "d.jsonl",
               R"({"frame_id":"a","detections":[{"class":1,"box":[0,0,2,2],"score":0.5}],"gt":[{"class":0,"box":[0,0,1,1]}]})"
               "\n"
               R"({"frame_id":"b","class":"class2","box":[1,1,3,3],"score":0.25,"certain":true})"
               "\n"
               R"({"frame_id":"a","class":0,"box":[0,0,1,1],"score":0.75})"
               "\n");
    const auto d = io::read_detections(dir / "d.jsonl");
    REQUIRE(d.frame_ids == std::vector<std::string>{"a", "b"});
    REQUIRE(d.detections[0].size() == 2);
    CHECK(d.detections[0][1].score == 0.75);
    CHECK(d.detections[1][0].class_id == 2);
    CHECK(d.max_class == 2);
    CHECK(d.has_truth);
    CHECK(d.truth[0].size() == 1);
    CHECK(d.truth[1].empty());

    std::ostringstream written;
    io::write_detections(written, d.frame_ids, d.detections);
    write_file(dir / "again.jsonl", written.str());
    const auto again = io::read_detections(dir / "again.jsonl");
    CHECK(again.frame_ids == d.frame_ids);
    CHECK(again.detections[0][0].box == d.detections[0][0].box);
    CHECK(again.detections[1][0].score == d.detections[1][0].score);

    write_file(dir / "named.jsonl", R"({"frame_id":"a","class":"bus","box":[0,0,1,1],"score":0.5})");
    CHECK_ERROR_KIND(io::read_detections(dir / "named.jsonl"), ErrorKind::Malformed);
    CHECK(io::read_detections(dir / "named.jsonl", ClassCatalog({"car", "bus"})).detections[0][0].class_id == 1);
  }
}
