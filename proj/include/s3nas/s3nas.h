/* C interface to the s3nas pipeline.
 *
 * Usage: create a context, load a config (optionally with dotted-path
 * overrides), then run commands against it. All functions returning int use
 * the s3nas_status codes; on failure the human-readable cause is available
 * through s3nas_last_error() until the next call on the same context.
 * Contexts are not thread-safe; use one per thread. */
#ifndef S3NAS_H
#define S3NAS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct s3nas_ctx s3nas_ctx;

typedef enum {
  S3NAS_OK = 0,
  S3NAS_ERR_INTERNAL = 1,   /* unexpected failure; see s3nas_last_error */
  S3NAS_ERR_CONFIG = 2,     /* config parse/validation error */
  S3NAS_ERR_INFEASIBLE = 3, /* constraints cannot be satisfied */
  S3NAS_ERR_IO = 4,         /* missing or unwritable artifact */
  S3NAS_ERR_USAGE = 5       /* null argument or no config loaded */
} s3nas_status;

/* Library version string, e.g. "1.0.0". Never NULL. */
const char* s3nas_version(void);

/* Returns NULL only on allocation failure. */
s3nas_ctx* s3nas_ctx_create(void);
void s3nas_ctx_destroy(s3nas_ctx* ctx);

/* Message of the last failed call on this context; "" if none. */
const char* s3nas_last_error(const s3nas_ctx* ctx);

/* Load a config from a JSON file, applying `n_overrides` strings of the form
 * "dotted.path=value" in order. Pass overrides = NULL when n_overrides = 0. */
int s3nas_load_config(s3nas_ctx* ctx, const char* path, const char* const* overrides,
                      int n_overrides);

/* Load a config from an in-memory JSON document. */
int s3nas_load_config_text(s3nas_ctx* ctx, const char* json_text);

/* Override individual fields of the loaded config. */
int s3nas_set_seed(s3nas_ctx* ctx, unsigned long long seed);
int s3nas_set_workers(s3nas_ctx* ctx, int workers);

/* Canonical JSON of the loaded config. Valid until the next call on this
 * context; NULL if no config is loaded. */
const char* s3nas_config_json(s3nas_ctx* ctx);

/* Run one pipeline command: gen-data, train, evolve-space, search, eval,
 * ablate-inherit, analyze-attention or report. */
int s3nas_run(s3nas_ctx* ctx, const char* command);

#ifdef __cplusplus
}
#endif

#endif /* S3NAS_H */
