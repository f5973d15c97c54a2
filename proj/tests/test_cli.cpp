#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "rpl/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout and stderr together.
Run rpl_cli(const std::string& args) {
  const std::string cmd = std::string(RPL_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

const std::string kExample = std::string(RPL_SOURCE_DIR) + "/tests/data/thresholds_example.jsonl";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rpl_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const std::string kSmallRun =
    "--set scene.source_frames=60 --set scene.target_train_frames=30 --set scene.target_test_frames=20 "
    "--set pretrain.epochs=5 --set train.refresh_interval=10 --set train.gamma=0.01 --iterations 20";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("thresholds on the worked example") {
    const auto r = rpl_cli("thresholds --input " + kExample + " --classes A,B,C,D,E");
    REQUIRE(r.status == 0);
    const json j = json::parse(r.out);
    CHECK(j["thresholds"]["A"] == 0.6);
    CHECK(j["thresholds"]["B"] == 0.3);
    for (const char* c : {"C", "D", "E"}) CHECK(j["thresholds"][c].is_null());
    CHECK(j["n_f"] == 6);
    CHECK(j["counts"]["C"] == 0);
  }

  TEST_CASE("the objectness floor decides what counts as foreground") {
    const auto r = rpl_cli("thresholds --input " + kExample + " --objectness-floor 0.0 --fallback 0.4");
    REQUIRE(r.status == 0);
    const json j = json::parse(r.out);
    CHECK(j["n_f"] == 7);
    CHECK(j["counts"]["class2"] == 1);
    CHECK(j["fallback"] == 0.4);
  }

  TEST_CASE("usage and runtime errors") {
    auto r = rpl_cli("thresholds --input " + kExample + " --bogus");
    CHECK(r.status == 2);
    CHECK(r.out.find("error kind=usage") != std::string::npos);
    r = rpl_cli("");
    CHECK(r.status == 2);
    r = rpl_cli("thresholds --input /nonexistent/frames.jsonl");
    CHECK(r.status == 1);
    CHECK(r.out.find("error kind=io") != std::string::npos);
    r = rpl_cli("thresholds --input " + kExample + " --classes A,B");
    CHECK(r.status == 1);
    r = rpl_cli("selftrain --out " + scratch("bad").string() + " --set train.refresh_interval=0");
    CHECK(r.status == 1);
    CHECK(r.out.find("refresh_interval") != std::string::npos);
    r = rpl_cli("selftrain --out " + scratch("bad2").string() + " --fixed-delta 0.7");
    CHECK(r.status == 2);
  }

  TEST_CASE("nms and assign on stored proposals") {
    const fs::path dir = scratch("nms");
    auto r = rpl_cli("nms --input " + kExample + " --out " + (dir / "nms.jsonl").string());
    REQUIRE(r.status == 0);
    CHECK(fs::file_size(dir / "nms.jsonl") > 0);
    r = rpl_cli("assign --input " + kExample + " --fixed-delta 0.5 --beta 0.85 --out " + (dir / "a.jsonl").string());
    REQUIRE(r.status == 0);
    std::size_t lines = 0;
    for (const auto& c : rpl::io::read_text(dir / "a.jsonl")) lines += c == '\n';
    // Scores 0.5, 0.6, 0.9 (class 0) and 0.8 (class 1) pass; none overlap.
    CHECK(lines == 4);
  }

  TEST_CASE("selftrain is byte-for-byte reproducible") {
    const fs::path a = scratch("a"), b = scratch("b");
    const auto ra = rpl_cli("selftrain " + kSmallRun + " --out " + a.string());
    const auto rb = rpl_cli("selftrain " + kSmallRun + " --out " + b.string());
    REQUIRE(ra.status == 0);
    REQUIRE(rb.status == 0);
    CHECK(ra.out == rb.out);
    for (const char* f : {"losses.csv", "summary.json", "teacher.ckpt", "student.ckpt", "config.ini"}) {
      REQUIRE(fs::exists(a / f));
      CHECK_MESSAGE(rpl::io::read_text(a / f) == rpl::io::read_text(b / f), f);
    }
    const json s = json::parse(rpl::io::read_text(a / "summary.json"));
    CHECK(s.contains("threshold_history"));

    const fs::path c = scratch("c");
    REQUIRE(rpl_cli("selftrain " + kSmallRun + " --seed 9 --out " + c.string()).status == 0);
    CHECK(rpl::io::read_text(a / "teacher.ckpt") != rpl::io::read_text(c / "teacher.ckpt"));
  }

  TEST_CASE("simulate, pretrain, nms and eval agree end to end") {
    const fs::path dir = scratch("pipeline");
    const std::string scene =
        "--set scene.source_frames=60 --set scene.target_train_frames=20 --set scene.target_test_frames=30 ";
    REQUIRE(rpl_cli("simulate " + scene + "--out " + dir.string()).status == 0);
    for (const char* f : {"source.jsonl", "target_train.jsonl", "target_test.jsonl", "target_train_gt.jsonl",
                          "manifest.json"})
      CHECK(fs::exists(dir / f));
    CHECK(rpl::io::read_text(dir / "target_train.jsonl").find("\"gt\"") == std::string::npos);

    const auto pre = rpl_cli("pretrain " + scene + "--set pretrain.epochs=5 --data " + dir.string() + " --out " +
                             (dir / "source.ckpt").string());
    REQUIRE(pre.status == 0);
    const double target_map = json::parse(pre.out)["target_map_50"];

    REQUIRE(rpl_cli("nms --input " + (dir / "target_test.jsonl").string() + " --params " +
                    (dir / "source.ckpt").string() + " --out " + (dir / "det.jsonl").string())
                .status == 0);
    const auto ev = rpl_cli("eval --predictions " + (dir / "det.jsonl").string() + " --gt " +
                            (dir / "target_test.jsonl").string() + " --out " + (dir / "eval").string());
    REQUIRE(ev.status == 0);
    CHECK(json::parse(ev.out)["map_50"] == target_map);
    CHECK(fs::exists(dir / "eval" / "eval.json"));
    CHECK(fs::exists(dir / "eval" / "pr_class0.csv"));
  }
}
