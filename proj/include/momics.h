/*
 * Copyright 2026 the momics authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * Public C API of the momics shared library.
 *
 * Every function returns a momics_status; any non-OK status leaves a
 * human-readable message in thread-local storage, retrievable with
 * momics_last_error() until the next call on the same thread. Handles are
 * opaque and must be released with their matching _free function. Passing
 * NULL where a handle or output pointer is required yields
 * MOMICS_ERR_CONFIG.
 */

#ifndef MOMICS_H_
#define MOMICS_H_

#include <stddef.h>

#if defined(_WIN32)
#ifdef MOMICS_BUILD
#define MOMICS_API __declspec(dllexport)
#else
#define MOMICS_API __declspec(dllimport)
#endif
#elif defined(__GNUC__) || defined(__clang__)
#define MOMICS_API __attribute__((visibility("default")))
#else
#define MOMICS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum momics_status {
  MOMICS_OK = 0,
  MOMICS_ERR_INTERNAL = 1, /* invariant violation inside the library */
  MOMICS_ERR_CONFIG = 2,   /* invalid configuration or arguments */
  MOMICS_ERR_DATA = 3,     /* dataset, file, or checkpoint validation */
  MOMICS_ERR_NUMERIC = 4,  /* non-finite values or numeric failure */
} momics_status;

/* Library semantic version, e.g. "1.0.0". Static storage; do not free. */
MOMICS_API const char* momics_version(void);

/* Message of the most recent failure on this thread; "" when none. */
MOMICS_API const char* momics_last_error(void);

/*
 * Run configuration: every section and key of the INI config file, with
 * all defaults resolved. Unknown sections or keys are rejected.
 */
typedef struct momics_config momics_config;

/* New configuration with every key at its default value. */
MOMICS_API momics_status momics_config_create(momics_config** out);
/* Parses an INI config file; defaults fill unspecified keys. */
MOMICS_API momics_status momics_config_load(const char* path, momics_config** out);
/* Sets one key, re-validating the whole configuration. */
MOMICS_API momics_status momics_config_set(momics_config* cfg, const char* section,
                                const char* key, const char* value);
/*
 * Copies the resolved value of one key into buf as a NUL-terminated
 * string. Fails with MOMICS_ERR_CONFIG when the key is unknown or buf
 * (of capacity cap) is too small.
 */
MOMICS_API momics_status momics_config_get(const momics_config* cfg, const char* section,
                                const char* key, char* buf, size_t cap);
MOMICS_API void momics_config_free(momics_config* cfg);

typedef struct momics_run_options {
  int force;   /* overwrite a non-empty output directory */
  int dry_run; /* validate and print the plan; write nothing */
  int echo;    /* mirror log records to stdout */
} momics_run_options;

/*
 * Pipeline commands. Each consumes the configuration sections named in the
 * config file documentation, writes its artifacts plus the resolved
 * effective config and a log into [run] out, and returns MOMICS_OK on
 * success. opts may be NULL for all-zero options.
 */
MOMICS_API momics_status momics_run_synth(const momics_config* cfg,
                               const momics_run_options* opts);
MOMICS_API momics_status momics_run_pretrain(const momics_config* cfg,
                                  const momics_run_options* opts);
MOMICS_API momics_status momics_run_finetune_subtype(const momics_config* cfg,
                                          const momics_run_options* opts);
MOMICS_API momics_status momics_run_finetune_survival(const momics_config* cfg,
                                           const momics_run_options* opts);
MOMICS_API momics_status momics_run_generate(const momics_config* cfg,
                                  const momics_run_options* opts);
MOMICS_API momics_status momics_run_evaluate(const momics_config* cfg,
                                  const momics_run_options* opts);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MOMICS_H_ */
