// Command-line front end; everything substantive lives behind the C API.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s3nas/s3nas.h"

int main(int argc, char** argv) {
  CLI::App app{"desk-scale architecture search pipeline"};
  app.require_subcommand(0);

  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;

  app.add_option("command", command,
                 "one of: gen-data, train, evolve-space, search, eval, ablate-inherit, "
                 "analyze-attention, report")
      ->required();
  app.add_option("--config", config_path, "JSON run config")->required();
  app.add_option("--set", overrides, "override a config field, e.g. --set evolution.tau=0.3");
  app.add_option("--seed", seed, "override the master seed")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--workers", workers, "worker count (1 guarantees reproducibility)");

  CLI11_PARSE(app, argc, argv);

  struct CtxDeleter {
    void operator()(s3nas_ctx* c) const { s3nas_ctx_destroy(c); }
  };
  std::unique_ptr<s3nas_ctx, CtxDeleter> ctx(s3nas_ctx_create());
  if (!ctx) {
    std::fprintf(stderr, "s3nas: out of memory\n");
    return S3NAS_ERR_INTERNAL;
  }

  std::vector<const char*> ov_ptrs;
  for (const auto& ov : overrides) ov_ptrs.push_back(ov.c_str());
  int rc = s3nas_load_config(ctx.get(), config_path.c_str(),
                             ov_ptrs.empty() ? nullptr : ov_ptrs.data(),
                             static_cast<int>(ov_ptrs.size()));
  if (rc == S3NAS_OK && seed_set) rc = s3nas_set_seed(ctx.get(), seed);
  if (rc == S3NAS_OK && workers > 0) rc = s3nas_set_workers(ctx.get(), workers);
  if (rc == S3NAS_OK) rc = s3nas_run(ctx.get(), command.c_str());

  if (rc != S3NAS_OK) {
    std::fprintf(stderr, "s3nas %s: %s\n", command.c_str(), s3nas_last_error(ctx.get()));
    return rc;
  }
  std::printf("s3nas %s: done\n", command.c_str());
  return 0;
}
