#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "s3nas/s3nas.h"

namespace fs = std::filesystem;

namespace {

struct Ctx {
  s3nas_ctx* p;
  Ctx() : p(s3nas_ctx_create()) { REQUIRE(p != nullptr); }
  ~Ctx() { s3nas_ctx_destroy(p); }
};

const char* kDemoConfig = S3NAS_SOURCE_DIR "/configs/demo_tabular.json";

}  // namespace

TEST_CASE("version and null-safety") {
  CHECK(s3nas_version() != nullptr);
  CHECK(std::strlen(s3nas_version()) > 0);
  CHECK(s3nas_run(nullptr, "train") == S3NAS_ERR_USAGE);
  CHECK(std::string(s3nas_last_error(nullptr)) == "null context");
  s3nas_ctx_destroy(nullptr);  // must be a no-op
}

TEST_CASE("usage errors before a config is loaded") {
  Ctx ctx;
  CHECK(std::string(s3nas_last_error(ctx.p)).empty());
  CHECK(s3nas_run(ctx.p, "train") == S3NAS_ERR_USAGE);
  CHECK(std::string(s3nas_last_error(ctx.p)).find("no config") != std::string::npos);
  CHECK(s3nas_set_seed(ctx.p, 1) == S3NAS_ERR_USAGE);
  CHECK(s3nas_config_json(ctx.p) == nullptr);
  CHECK(s3nas_run(ctx.p, nullptr) == S3NAS_ERR_USAGE);
  CHECK(s3nas_load_config(ctx.p, nullptr, nullptr, 0) == S3NAS_ERR_USAGE);
}

TEST_CASE("config loading, overrides and error codes") {
  Ctx ctx;
  CHECK(s3nas_load_config_text(ctx.p, "{ not json") == S3NAS_ERR_CONFIG);
  CHECK(std::strlen(s3nas_last_error(ctx.p)) > 0);
  CHECK(s3nas_load_config_text(ctx.p, R"({"workers": 0})") == S3NAS_ERR_CONFIG);
  CHECK(s3nas_load_config(ctx.p, "/nonexistent/config.json", nullptr, 0) == S3NAS_ERR_IO);

  CHECK(s3nas_load_config_text(ctx.p, "{}") == S3NAS_OK);
  CHECK(std::string(s3nas_last_error(ctx.p)).empty());
  const char* json = s3nas_config_json(ctx.p);
  REQUIRE(json != nullptr);
  CHECK(std::string(json).find("\"seed\"") != std::string::npos);

  const char* overrides[] = {"seed=42", "evolution.tau=0.3"};
  CHECK(s3nas_load_config(ctx.p, kDemoConfig, overrides, 2) == S3NAS_OK);
  CHECK(std::string(s3nas_config_json(ctx.p)).find("\"seed\": 42") != std::string::npos);
  CHECK(s3nas_set_seed(ctx.p, 9) == S3NAS_OK);
  CHECK(std::string(s3nas_config_json(ctx.p)).find("\"seed\": 9") != std::string::npos);
  CHECK(s3nas_set_workers(ctx.p, 0) == S3NAS_ERR_CONFIG);
  CHECK(s3nas_set_workers(ctx.p, 2) == S3NAS_OK);
}

TEST_CASE("commands run end to end through the C interface") {
  Ctx ctx;
  const fs::path out = fs::temp_directory_path() / "s3nas_capi_run";
  fs::remove_all(out);
  const std::string ov = "out_dir=" + out.string();
  const char* overrides[] = {ov.c_str()};
  REQUIRE(s3nas_load_config(ctx.p, kDemoConfig, overrides, 1) == S3NAS_OK);

  CHECK(s3nas_run(ctx.p, "no-such-command") == S3NAS_ERR_CONFIG);
  CHECK(s3nas_run(ctx.p, "report") == S3NAS_ERR_IO);  // nothing evolved yet
  CHECK(s3nas_run(ctx.p, "evolve-space") == S3NAS_OK);
  CHECK(s3nas_run(ctx.p, "report") == S3NAS_OK);
  CHECK(fs::exists(out / "space_history.json"));
  CHECK(fs::exists(out / "report/comparison.csv"));

  // an impossible budget surfaces as infeasibility
  const char* tight[] = {ov.c_str(), "budget.max_params=1"};
  REQUIRE(s3nas_load_config(ctx.p, kDemoConfig, tight, 2) == S3NAS_OK);
  CHECK(s3nas_run(ctx.p, "evolve-space") == S3NAS_ERR_INFEASIBLE);
  CHECK(std::string(s3nas_last_error(ctx.p)).find("rate") != std::string::npos);
}
