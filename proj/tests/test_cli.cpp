#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "crskit/cli.hpp"
#include "crskit/io.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using crskit::io::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "crskit");
  std::ostringstream out, err;
  const int code = crskit::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("crskit_cli_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

const char* kFixture =
    R"({"image_id":"fx","classes":{"obj":{"gt_boxes":[[0,0,4,10],[6,0,10,10]],"count":2}},"proposals":[)"
    R"({"region_id":0,"box":[0,0,10,10],"scores":{"obj":0.9}},)"
    R"({"region_id":1,"box":[0,0,4,10],"scores":{"obj":0.6}},)"
    R"({"region_id":2,"box":[6,0,10,10],"scores":{"obj":0.5}}]})"
    "\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == crskit::kExitUsage);
  CHECK(run({"frobnicate"}).code == crskit::kExitUsage);
  CHECK(run({"select"}).code == crskit::kExitUsage);  // --dataset is required
  CHECK(run({"gen", "--corloc-variant", "nearby"}).code == crskit::kExitUsage);
  CHECK(run({"--help"}).code == crskit::kExitOk);
}

TEST_CASE("validation errors exit with 1") {
  TempDir tmp;
  CHECK(run({"select", "--dataset", tmp / "missing.jsonl"}).code == crskit::kExitValidation);
  write_file(tmp / "bad.jsonl", "{\"image_id\":\"x\"}\n");
  const auto r = run({"select", "--dataset", tmp / "bad.jsonl"});
  CHECK(r.code == crskit::kExitValidation);
  CHECK(r.err.find("line 1") != std::string::npos);
  CHECK(run({"gen", "--images", "2", "--T", "1.5"}).code == crskit::kExitValidation);
}

TEST_CASE("select on the merged fixture") {
  TempDir tmp;
  write_file(tmp / "fx.jsonl", kFixture);
  const auto r = run({"select", "--dataset", tmp / "fx.jsonl", "--nms-threshold", "0.5"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("kind") == "selection");
  const auto& sel = j.at("selections").at(0);
  CHECK(sel.at("effective_count") == 2);
  CHECK(sel.at("complete") == true);
  REQUIRE(sel.at("regions").size() == 2);
  CHECK(sel.at("regions")[0].at("region_id") == 1);
  CHECK(sel.at("regions")[1].at("region_id") == 2);

  const auto base = run({"select", "--dataset", tmp / "fx.jsonl", "--nms-threshold", "0.5", "--no-count-guided"});
  REQUIRE(base.code == 0);
  const auto b = json::parse(base.out).at("selections").at(0);
  REQUIRE(b.at("regions").size() == 1);
  CHECK(b.at("regions")[0].at("region_id") == 0);
}

TEST_CASE("gen, refine, eval and report pipeline") {
  TempDir tmp;
  REQUIRE(run({"gen", "--images", "12", "--classes", "2", "--out", tmp / "w.jsonl"}).code == 0);
  CHECK(crskit::io::load_dataset(tmp / "w.jsonl").size() == 12);

  REQUIRE(run({"nms", "--dataset", tmp / "w.jsonl", "--out", tmp / "nms.json"}).code == 0);
  CHECK(json::parse(slurp(tmp / "nms.json")).at("kind") == "nms");

  REQUIRE(run({"refine", "--dataset", tmp / "w.jsonl", "--iterations", "2", "--out", tmp / "r.json"}).code == 0);
  const auto rep = json::parse(slurp(tmp / "r.json"));
  CHECK(rep.at("kind") == "refinement");
  CHECK(rep.at("iterations").size() == 2);

  const auto text = run({"report", "--in", tmp / "r.json"});
  REQUIRE(text.code == 0);
  CHECK_FALSE(text.out.empty());

  // ground-truth boxes as detections score perfectly
  std::ofstream dets(tmp / "d.jsonl");
  for (const auto& img : crskit::io::load_dataset(tmp / "w.jsonl")) {
    for (const auto& [cls, entry] : img.classes) {
      for (const auto& b : entry.gt_boxes) {
        dets << crskit::io::to_json(crskit::Detection{img.image_id, cls, b, 0.9}).dump() << "\n";
      }
    }
  }
  dets.close();
  const auto ev = run({"eval", "--dataset", tmp / "w.jsonl", "--detections", tmp / "d.jsonl"});
  REQUIRE(ev.code == 0);
  const auto m = json::parse(ev.out);
  CHECK(m.at("kind") == "evaluation");
  CHECK(m.at("metrics").at("mAP").get<double>() == doctest::Approx(1.0));
  CHECK(m.at("metrics").at("mean_corloc").get<double>() == doctest::Approx(1.0));
}

TEST_CASE("oracle reports a match rate") {
  const auto r = run({"oracle", "--instances", "50", "--seed", "3"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  const double rate = j.at("match_rate").get<double>();
  CHECK(rate >= 0.0);
  CHECK(rate <= 1.0);
  CHECK(j.at("directional").at("greedy_above_exact") == 0);
  CHECK(run({"oracle", "--instances", "5", "--max-n", "40"}).code == crskit::kExitValidation);
}

TEST_CASE("reruns are byte-identical") {
  TempDir tmp;
  for (const char* name : {"a", "b"}) {
    const std::string dir = tmp / name;
    fs::create_directories(dir);
    REQUIRE(run({"gen", "--images", "6", "--classes", "2", "--seed", "5", "--out", dir + "/w.jsonl"}).code == 0);
    REQUIRE(run({"refine", "--dataset", dir + "/w.jsonl", "--out", dir + "/r.json"}).code == 0);
  }
  CHECK(slurp(tmp / "a/w.jsonl") == slurp(tmp / "b/w.jsonl"));
  CHECK(slurp(tmp / "a/r.json") == slurp(tmp / "b/r.json"));
}

TEST_CASE("the binary maps exit codes") {
  const std::string bin = CRSKIT_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status(bin + " --help") == 0);
  CHECK(status(bin + " nonsense") == 2);
  CHECK(status(bin + " select --dataset /nonexistent/file.jsonl") == 1);
}
