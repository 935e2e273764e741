// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fgvp/backends.hpp"
#include "fgvp/cli.hpp"
#include "fgvp/image_io.hpp"
#include "fgvp/prompting.hpp"
#include "oracles.hpp"

using namespace fgvp;
namespace fs = std::filesystem;

namespace {

const fs::path kSynthetic = fs::path(FGVP_SOURCE_DIR) / "data" / "synthetic";

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("fgvp-cli-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run fgvp_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("help and usage errors") {
  const Run help = fgvp_cli({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("rec") != std::string::npos);
  const Run rec_help = fgvp_cli({"rec", "--help"});
  CHECK(rec_help.code == cli::kExitOk);
  CHECK(rec_help.out.find("default 100") != std::string::npos);
  CHECK(rec_help.out.find("default 0.7") != std::string::npos);
  CHECK(fgvp_cli({}).code == cli::kExitUsage);
  CHECK(fgvp_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(fgvp_cli({"rec"}).code == cli::kExitUsage);
  CHECK(fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--backend", "gpu"}).code == cli::kExitUsage);
  CHECK(fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--prompts", "d4|z9"}).code == cli::kExitUsage);
  CHECK(fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--alpha", "3"}).code == cli::kExitUsage);
  const Run missing = fgvp_cli({"rec", "/nonexistent/rec.jsonl"});
  CHECK(missing.code == cli::kExitFailure);
  CHECK(missing.err.find("/nonexistent/rec.jsonl") != std::string::npos);
}

TEST_CASE("render d4 keeps in-mask pixels") {
  TempDir tmp;
  std::mt19937_64 rng(1);
  const ImageBuffer img = oracle::random_image(rng, 24, 30);
  write_png(tmp / "src.png", img);
  const BinaryMask m = oracle::random_mask(rng, 24, 30);
  std::ofstream(tmp / "geo.json") << nlohmann::json{{"masks", {rle_encode(m)}}}.dump();
  const Run r = fgvp_cli({"render", tmp / "src.png", "--geometry", tmp / "geo.json", "--kind", "d4", "--out",
                          tmp / "out"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(count_files(tmp.path / "out", ".png") == 1);
  const ImageBuffer out = read_image(tmp.path / "out" / "src_0_d4.png");
  const ImageBuffer blur = gaussian_blur(img, PromptStyle{}.blur_sigma);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 30; ++x) CHECK(out.at(y, x) == (m.get(y, x) ? img.at(y, x) : blur.at(y, x)));
  }
}

TEST_CASE("render cardinality and errors") {
  TempDir tmp;
  std::mt19937_64 rng(2);
  write_png(tmp / "pic.png", oracle::random_image(rng, 20, 20));
  std::ofstream(tmp / "boxes.json") << R"({"boxes": [[1, 1, 8, 8], [10, 4, 6, 9]]})";
  const Run two = fgvp_cli({"render", tmp / "pic.png", "--geometry", tmp / "boxes.json", "--kind", "b1|c1",
                            "--out", tmp / "o"});
  REQUIRE(two.code == cli::kExitOk);
  CHECK(count_files(tmp.path / "o", ".png") == 4);
  for (const char* f : {"pic_0_b1.png", "pic_0_c1.png", "pic_1_b1.png", "pic_1_c1.png"}) CHECK(fs::exists(tmp.path / "o" / f));

  CHECK(fgvp_cli({"render", tmp / "pic.png", "--geometry", tmp / "boxes.json", "--kind", "z9"}).code ==
        cli::kExitUsage);
  CHECK(fgvp_cli({"render", tmp / "pic.png", "--geometry", tmp / "boxes.json", "--kind", "d4", "--segmenter",
                  "off", "--out", tmp / "x"})
            .code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(tmp.path / "x"));
  const Run seg = fgvp_cli({"render", tmp / "pic.png", "--geometry", tmp / "boxes.json", "--kind", "d4",
                            "--out", tmp / "d"});
  CHECK(seg.code == cli::kExitOk);
  CHECK(count_files(tmp.path / "d", ".png") == 2);

  std::ofstream(tmp / "bad.json") << R"({"boxes": [[1, 1, 0, 8]]})";
  const Run bad = fgvp_cli({"render", tmp / "pic.png", "--geometry", tmp / "bad.json", "--out", tmp / "b"});
  CHECK(bad.code == cli::kExitFailure);
  CHECK(bad.err.find("bad.json") != std::string::npos);
}

TEST_CASE("rec smoke run on the synthetic set") {
  TempDir tmp;
  const Run r = fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--report", tmp / "r.json"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("accuracy: ") != std::string::npos);
  CHECK(r.out.find("/20)") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(tmp.path / "r.json"));
  CHECK(j["total"] == 20);
  CHECK(j["config"]["prompts"] == "d4");

  const Run md = fgvp_cli({"partdet", (kSynthetic / "part.jsonl").string(), "--report", tmp / "p.md",
                           "--format", "markdown", "--matching", "argmax"});
  REQUIRE(md.code == cli::kExitOk);
  CHECK(slurp(tmp.path / "p.md").find("# Part detection") == 0);
}

TEST_CASE("repeated runs write identical reports") {
  TempDir tmp;
  for (const char* name : {"a.json", "b.json"}) {
    const Run r = fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--post", "subtract", "--neg-q", "10",
                            "--seed", "7", "--report", tmp / name});
    REQUIRE(r.code == cli::kExitOk);
  }
  CHECK(slurp(tmp.path / "a.json") == slurp(tmp.path / "b.json"));
  const auto j = nlohmann::json::parse(slurp(tmp.path / "a.json"));
  CHECK(j["config"]["post"] == "subtract");
  CHECK(j["config"]["neg_q"] == 10);
  CHECK(j["config"]["seed"] == 7);
}

TEST_CASE("config echo matches the flags") {
  TempDir tmp;
  const Run r = fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--prompts", "p|d4", "--square", "pad",
                          "--sigma", "5", "--grid", "8", "--mask-filter", "off", "--report", tmp / "r.json"});
  REQUIRE(r.code == cli::kExitOk);
  const auto c = nlohmann::json::parse(slurp(tmp.path / "r.json"))["config"];
  CHECK(c["prompts"] == "p|d4");
  CHECK(c["square"] == "pad");
  CHECK(c["sigma"] == 5.0);
  CHECK(c["grid"] == 8);
  CHECK(c["mask_filter"] == false);
  CHECK(c["nms"] == 0.7);
  CHECK(c["backend"] == "fixture");
}

TEST_CASE("segmenter conflicts are usage errors before any work") {
  TempDir tmp;
  const Run d4 = fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--segmenter", "off", "--report",
                           tmp / "r.json"});
  CHECK(d4.code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(tmp.path / "r.json"));
  // box prompts still need the segmenter for the proposal-free records
  CHECK(fgvp_cli({"rec", (kSynthetic / "rec.jsonl").string(), "--segmenter", "off", "--prompts", "b1"}).code ==
        cli::kExitUsage);
  CHECK(fgvp_cli({"partdet", (kSynthetic / "part.jsonl").string(), "--segmenter", "off"}).code ==
        cli::kExitUsage);
}

TEST_CASE("strict mode turns record errors into exit status 2") {
  TempDir tmp;
  fs::copy(kSynthetic, tmp.path / "data", fs::copy_options::recursive);
  {
    std::ofstream out(tmp.path / "data" / "rec.jsonl", std::ios::app);
    out << R"({"image":"gone.png","proposals":[[0,0,4,4]],"caption":"the red block","gt_box":[0,0,4,4]})" << "\n";
  }
  const std::string ds = (tmp.path / "data" / "rec.jsonl").string();
  const Run lenient = fgvp_cli({"rec", ds});
  CHECK(lenient.code == cli::kExitOk);
  CHECK(lenient.out.find("1 record error") != std::string::npos);
  CHECK(lenient.err.find("record 20") != std::string::npos);
  CHECK(fgvp_cli({"rec", ds, "--strict"}).code == cli::kExitRecordErrors);
}

TEST_CASE("cache stats and clear") {
  TempDir tmp;
  DiskCache cache(tmp.path / "c");
  cache.put(DiskCache::make_key("a", "b", "c"), "hello");
  const Run stats = fgvp_cli({"cache", "stats", "--cache-dir", tmp / "c"});
  CHECK(stats.code == cli::kExitOk);
  CHECK(stats.out.find("entries: 1") != std::string::npos);
  const Run clear = fgvp_cli({"cache", "clear", "--cache-dir", tmp / "c"});
  CHECK(clear.code == cli::kExitOk);
  CHECK(clear.out.find("removed 1") != std::string::npos);
  CHECK(cache.stats().entries == 0);
  CHECK(fgvp_cli({"cache", "purge"}).code == cli::kExitUsage);
}
