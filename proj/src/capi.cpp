#include "s3nas/s3nas.h"

#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/pipeline.hpp"

struct s3nas_ctx {
  std::optional<s3::RunConfig> config;
  std::string last_error;
  std::string config_json;  // buffer returned by s3nas_config_json
};

namespace {

int fail(s3nas_ctx* ctx, int code, const std::string& message) {
  if (ctx) ctx->last_error = message;
  return code;
}

int guard(s3nas_ctx* ctx, const std::function<void()>& body) {
  try {
    body();
    ctx->last_error.clear();
    return S3NAS_OK;
  } catch (const s3::ConfigError& e) {
    return fail(ctx, S3NAS_ERR_CONFIG, e.what());
  } catch (const s3::ParseError& e) {
    return fail(ctx, S3NAS_ERR_CONFIG, e.what());
  } catch (const s3::ConstraintInfeasible& e) {
    return fail(ctx, S3NAS_ERR_INFEASIBLE, e.what());
  } catch (const s3::SamplingExhausted& e) {
    return fail(ctx, S3NAS_ERR_INFEASIBLE, e.what());
  } catch (const s3::EmptySample& e) {
    return fail(ctx, S3NAS_ERR_INFEASIBLE, e.what());
  } catch (const s3::IoError& e) {
    return fail(ctx, S3NAS_ERR_IO, e.what());
  } catch (const s3::FormatError& e) {
    return fail(ctx, S3NAS_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(ctx, S3NAS_ERR_INTERNAL, e.what());
  }
}

}  // namespace

extern "C" {

const char* s3nas_version(void) { return "1.0.0"; }

s3nas_ctx* s3nas_ctx_create(void) {
  try {
    return new s3nas_ctx();
  } catch (...) {
    return nullptr;
  }
}

void s3nas_ctx_destroy(s3nas_ctx* ctx) { delete ctx; }

const char* s3nas_last_error(const s3nas_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

int s3nas_load_config(s3nas_ctx* ctx, const char* path, const char* const* overrides,
                      int n_overrides) {
  if (!ctx) return S3NAS_ERR_USAGE;
  if (!path) return fail(ctx, S3NAS_ERR_USAGE, "path is null");
  if (n_overrides < 0 || (n_overrides > 0 && !overrides))
    return fail(ctx, S3NAS_ERR_USAGE, "bad overrides array");
  return guard(ctx, [&] {
    std::vector<std::string> ovs(overrides, overrides + n_overrides);
    ctx->config = s3::RunConfig::load_file(path, ovs);
  });
}

int s3nas_load_config_text(s3nas_ctx* ctx, const char* json_text) {
  if (!ctx) return S3NAS_ERR_USAGE;
  if (!json_text) return fail(ctx, S3NAS_ERR_USAGE, "json_text is null");
  return guard(ctx, [&] { ctx->config = s3::RunConfig::from_json(json_text); });
}

int s3nas_set_seed(s3nas_ctx* ctx, unsigned long long seed) {
  if (!ctx) return S3NAS_ERR_USAGE;
  if (!ctx->config) return fail(ctx, S3NAS_ERR_USAGE, "no config loaded");
  ctx->config->seed = seed;
  ctx->last_error.clear();
  return S3NAS_OK;
}

int s3nas_set_workers(s3nas_ctx* ctx, int workers) {
  if (!ctx) return S3NAS_ERR_USAGE;
  if (!ctx->config) return fail(ctx, S3NAS_ERR_USAGE, "no config loaded");
  if (workers < 1) return fail(ctx, S3NAS_ERR_CONFIG, "workers must be >= 1");
  ctx->config->workers = workers;
  ctx->last_error.clear();
  return S3NAS_OK;
}

const char* s3nas_config_json(s3nas_ctx* ctx) {
  if (!ctx || !ctx->config) return nullptr;
  ctx->config_json = ctx->config->to_json();
  return ctx->config_json.c_str();
}

int s3nas_run(s3nas_ctx* ctx, const char* command) {
  if (!ctx) return S3NAS_ERR_USAGE;
  if (!command) return fail(ctx, S3NAS_ERR_USAGE, "command is null");
  if (!ctx->config) return fail(ctx, S3NAS_ERR_USAGE, "no config loaded");
  return guard(ctx, [&] { s3::run_command(*ctx->config, command); });
}

}  // extern "C"
