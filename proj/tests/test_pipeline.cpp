#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "core/pipeline.hpp"
#include "helpers.hpp"

using namespace s3;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

RunConfig demo_config(const fs::path& out) {
  auto cfg = RunConfig::load_file(std::string(S3NAS_SOURCE_DIR) + "/configs/demo_tabular.json");
  cfg.out_dir = out.string();
  return cfg;
}

// A supernet-backed config small enough for unit tests: 16x16 images, one
// block per stage, a few training steps.
RunConfig tiny_config(const fs::path& out) {
  RunConfig cfg = default_config();
  cfg.out_dir = out.string();
  cfg.seed = 5;
  cfg.dataset = {96, 48, 16, 1, 2, 0.3f};
  cfg.shape = {16, 1, 2, 2};
  cfg.space = s3::test::make_space({
      {DimensionKind::Depth, s3::test::same({1})},
      {DimensionKind::EmbedDim, s3::test::same({4, 8}, 4)},
      {DimensionKind::MlpRatio, s3::test::same({1})},
      {DimensionKind::WindowSize, {{{2}, {2}, {2}, {1}}, 1.0}},
      {DimensionKind::NumHeads, s3::test::same({1})},
      {DimensionKind::QkvDim, s3::test::same({4, 8}, 4)},
  });
  cfg.train.steps = 12;
  cfg.train.batch = 16;
  cfg.eval.samples = 4;
  cfg.ablation.archs = 3;
  cfg.attention.top_k = 2;
  cfg.attention.batch = 4;
  return cfg;
}

}  // namespace

TEST_CASE("spearman rank correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {7, 7, 7}) == 0.0);  // constant sample
  // hand case with one tie: ranks a = 1,2.5,2.5,4 vs b = 1,2,3,4
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(0.9486832981).epsilon(1e-9));
  CHECK_THROWS_AS(spearman({1}, {1, 2}), ConfigError);
  CHECK_THROWS_AS(spearman({}, {}), ConfigError);
}

TEST_CASE("unknown commands and missing artifacts fail cleanly") {
  auto out = fresh_dir("s3nas_pipe_errors");
  auto cfg = demo_config(out);
  CHECK_THROWS_AS(run_command(cfg, "frobnicate"), ConfigError);
  CHECK_THROWS_AS(run_command(cfg, "report"), IoError);       // no space history yet
  CHECK_THROWS_AS(run_command(cfg, "eval"), IoError);         // no checkpoint yet
}

TEST_CASE("gen-data writes datasets identical to in-memory generation") {
  auto out = fresh_dir("s3nas_pipe_data");
  auto cfg = demo_config(out);
  run_command(cfg, "gen-data");
  Dataset train = load_flat((out / "data/train.bin").string());
  Dataset val = load_flat((out / "data/val.bin").string());
  auto [t2, v2] = generate_synthetic(derive_seed(cfg.seed, "data"), cfg.dataset);
  CHECK(train.pixels == t2.pixels);
  CHECK(train.labels == t2.labels);
  CHECK(val.pixels == v2.pixels);
  CHECK(val.n == cfg.dataset.n_val);
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("evolve-space on the demo config matches the committed golden file") {
  auto out = fresh_dir("s3nas_pipe_golden");
  run_command(demo_config(out), "evolve-space");
  CHECK(slurp(out / "space_history.json") ==
        slurp(fs::path(S3NAS_SOURCE_DIR) / "tests/golden/space_history_demo.json"));
}

TEST_CASE("search and report artifacts are byte-identical across reruns") {
  auto out = fresh_dir("s3nas_pipe_idem");
  auto cfg = demo_config(out);
  run_command(cfg, "evolve-space");
  run_command(cfg, "search");
  run_command(cfg, "report");
  std::map<std::string, std::string> first;
  for (const auto& entry : fs::recursive_directory_iterator(out))
    if (entry.is_regular_file()) first[entry.path().string()] = slurp(entry.path());
  run_command(cfg, "evolve-space");
  run_command(cfg, "search");
  run_command(cfg, "report");
  for (const auto& [path, content] : first) CHECK(slurp(path) == content);
  CHECK(first.size() >= 10);
}

TEST_CASE("searched error does not increase across evolved spaces") {
  auto out = fresh_dir("s3nas_pipe_best");
  auto cfg = demo_config(out);
  run_command(cfg, "evolve-space");
  run_command(cfg, "search");
  std::stringstream in(slurp(out / "search/best.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,encoding,error,params,macs");
  std::vector<double> errors;
  while (std::getline(in, line)) {
    const auto q2 = line.find('"', line.find('"') + 1);
    const auto c = line.find(',', q2);
    errors.push_back(std::stod(line.substr(c + 1)));
  }
  REQUIRE(errors.size() == 3);  // iterations 0..2
  CHECK(errors[1] <= errors[0] + 1e-12);
  CHECK(errors[2] <= errors[1] + 1e-12);

  run_command(cfg, "report");
  std::stringstream cmp(slurp(out / "report/comparison.csv"));
  std::getline(cmp, line);
  CHECK(line == "iteration,q_e,q_t,q,searched_encoding,searched_error");
  int rows = 0;
  while (std::getline(cmp, line)) {
    CHECK(line.find('"') != std::string::npos);  // searched column filled
    rows++;
  }
  CHECK(rows == 3);
}

TEST_CASE("supernet-backed commands produce coherent artifacts") {
  auto out = fresh_dir("s3nas_pipe_tiny");
  auto cfg = tiny_config(out);
  run_command(cfg, "train");
  run_command(cfg, "eval");
  run_command(cfg, "ablate-inherit");
  run_command(cfg, "analyze-attention");

  CHECK(fs::exists(out / "supernet.ckpt"));
  CHECK(fs::exists(out / "train_summary.json"));

  std::stringstream ev(slurp(out / "eval.csv"));
  std::string line;
  std::getline(ev, line);
  CHECK(line == "encoding,params,macs,error");
  std::string prev_enc;
  int rows = 0;
  while (std::getline(ev, line)) {
    const auto enc = line.substr(0, line.find("\",") + 1);
    CHECK(prev_enc < enc);  // sorted, distinct
    prev_enc = enc;
    rows++;
  }
  CHECK(rows >= 1);
  CHECK(rows <= cfg.eval.samples);

  std::stringstream ab(slurp(out / "ablation.csv"));
  std::getline(ab, line);
  CHECK(line == "encoding,inherited,retrained");
  rows = 0;
  while (std::getline(ab, line)) rows++;
  CHECK(rows <= cfg.ablation.archs);
  CHECK(slurp(out / "ablation_summary.json").find("spearman") != std::string::npos);

  std::stringstream at(slurp(out / "attention.csv"));
  std::getline(at, line);
  CHECK(line == "stage,block,window,mean,median");
  rows = 0;
  while (std::getline(at, line)) rows++;
  CHECK(rows == 4);  // one block per stage at depth 1

  // eval reruns byte-identically (checkpoint round-trip is exact)
  const std::string eval_bytes = slurp(out / "eval.csv");
  run_command(cfg, "eval");
  CHECK(slurp(out / "eval.csv") == eval_bytes);
}
