#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/config.hpp"
#include "helpers.hpp"

using namespace s3;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p, std::ios::trunc);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("defaults validate and round-trip canonically") {
  RunConfig cfg = default_config();
  cfg.validate();
  const std::string text = cfg.to_json();
  RunConfig back = RunConfig::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.config_hash() == cfg.config_hash());
  CHECK(cfg.dataset.classes == 16);
  CHECK(cfg.shape.classes == 16);
  CHECK(cfg.search.budget.unbounded());
}

TEST_CASE("an empty document yields the default config") {
  RunConfig cfg = RunConfig::from_json("{}");
  CHECK(cfg.to_json() == default_config().to_json());
}

TEST_CASE("field errors carry the offending path") {
  auto message_of = [](const std::string& text) {
    try {
      RunConfig::from_json(text);
      return std::string("(no error)");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
  };
  CHECK(message_of(R"({"dataset": {"side": 16}})").find("dataset.side") != std::string::npos);
  CHECK(message_of(R"({"nonsense": 1})").find("nonsense") != std::string::npos);
  CHECK(message_of(R"({"train": {"lrr": 1}})").find("train.lrr") != std::string::npos);
  CHECK(message_of(R"({"evolution": {"mode": "up"}})").find("evolution.mode") !=
        std::string::npos);
  CHECK(message_of(R"({"budget": {"max_params": -3}})").find("budget.max_params") !=
        std::string::npos);
  CHECK(message_of(R"({"oracle": {"tabular": {"terms": [{"kind": "nope"}]}}})")
            .find("terms") != std::string::npos);
  CHECK(message_of(R"({"eval": {"archs": ["garbage"]}})").find("eval.archs") !=
        std::string::npos);
  CHECK(message_of(R"({"train": {"steps": "many"}})").find("train.steps") != std::string::npos);
}

TEST_CASE("nested sections parse into the typed config") {
  RunConfig cfg = RunConfig::from_json(R"({
    "seed": 99,
    "budget": {"max_params": 5000},
    "evolution": {"tau": 0.3, "mode": "symmetric", "gamma": {"embed_dim": 16}},
    "oracle": {"kind": "tabular", "finetune": true,
               "tabular": {"base": 0.8, "eta": 0.1,
                           "terms": [{"kind": "depth", "stage": 2, "coeff": 0.05}]}},
    "attention": {"top_k": 3, "arch": "min"}
  })");
  CHECK(cfg.seed == 99);
  REQUIRE(cfg.budget.max_params.has_value());
  CHECK(*cfg.budget.max_params == 5000);
  CHECK(*cfg.search.budget.max_params == 5000);  // mirrored
  CHECK(cfg.evolution.tau == 0.3);
  CHECK(cfg.evolution.mode == ShiftMode::Symmetric);
  CHECK(cfg.evolution.gamma[static_cast<int>(DimensionKind::EmbedDim)] == 16.0);
  CHECK(cfg.evolution.gamma[static_cast<int>(DimensionKind::Depth)] == 1.0);  // untouched
  CHECK(cfg.oracle.kind == OracleKind::Tabular);
  CHECK(cfg.oracle.finetune);
  REQUIRE(cfg.oracle.tabular.terms.size() == 1);
  CHECK(cfg.oracle.tabular.terms[0].kind == DimensionKind::Depth);
  CHECK(cfg.oracle.tabular.terms[0].stage == 2);
  CHECK(cfg.attention.top_k == 3);
  CHECK(cfg.attention.arch == "min");
}

TEST_CASE("a custom space embeds in the config document") {
  RunConfig cfg = default_config();
  cfg.space = s3::test::toy_space();
  RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.space.to_json() == s3::test::toy_space().to_json());
}

TEST_CASE("file loading applies dotted-path overrides in order") {
  auto path = write_temp("s3nas_cfg_override.json", R"({"seed": 1})");
  RunConfig cfg = RunConfig::load_file(path.string(),
                                       {"seed=5", "evolution.tau=0.25", "out_dir=/tmp/somewhere",
                                        "budget.max_params=777", "oracle.kind=tabular",
                                        "evolution.tau=0.3"});
  CHECK(cfg.seed == 5);
  CHECK(cfg.evolution.tau == 0.3);  // later override wins
  CHECK(cfg.out_dir == "/tmp/somewhere");
  CHECK(*cfg.budget.max_params == 777);
  CHECK(cfg.oracle.kind == OracleKind::Tabular);

  CHECK_THROWS_AS(RunConfig::load_file(path.string(), {"no-equals-sign"}), ConfigError);
  CHECK_THROWS_AS(RunConfig::load_file(path.string(), {"made.up.field=1"}), ConfigError);
  CHECK_THROWS_AS(RunConfig::load_file("/nonexistent/cfg.json"), IoError);
}

TEST_CASE("override values parse as JSON with a string fallback") {
  auto path = write_temp("s3nas_cfg_types.json", R"({})");
  RunConfig cfg = RunConfig::load_file(
      path.string(), {"oracle.kind=tabular", "oracle.finetune=true",
                      "eval.archs=[\"d2:e8:m2:w2n2q8,w2n2q8/d2:e8:m2:w2n2q8,w2n2q8/"
                      "d2:e8:m2:w2n2q8,w2n2q8/d2:e8:m2:w1n2q8,w1n2q8\"]"});
  CHECK(cfg.oracle.finetune);
  REQUIRE(cfg.eval.archs.size() == 1);
  decode(cfg.eval.archs[0]).validate_in(cfg.space);
}
