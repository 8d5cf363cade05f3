/*
 * cachefs.h
 *
 * This source file is part of the cachefs project
 *
 * Copyright 2026 cachefs project authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C API of the cachefs simulator shared library.
 *
 * A cfs_sim handle wraps one deterministic scenario execution: a cluster
 * configuration plus a scenario file. run() executes it; check() executes
 * it and audits the run (linearizability, crash-consistency prefix,
 * replica convergence, lease safety, conservation). All returned strings
 * are owned by the handle and remain valid until cfs_sim_close().
 */

#ifndef CACHEFS_H
#define CACHEFS_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CFS_API __declspec(dllexport)
#else
#define CFS_API __attribute__((visibility("default")))
#endif

typedef enum cfs_status {
  CFS_OK = 0,
  CFS_ERR_INVALID_ARG = 1,
  CFS_ERR_PARSE = 2,
  CFS_ERR_IO = 3,
  CFS_ERR_RUNTIME = 4,
  CFS_ERR_CHECK_FAILED = 5,
} cfs_status;

typedef struct cfs_sim cfs_sim; /* opaque */

CFS_API const char* cfs_version(void);
CFS_API const char* cfs_status_name(cfs_status s);

/* Handle construction from files or in-memory text. */
CFS_API cfs_status cfs_sim_open(const char* cluster_config_path,
                                const char* scenario_path, cfs_sim** out);
CFS_API cfs_status cfs_sim_open_text(const char* cluster_config_text,
                                     const char* scenario_text, cfs_sim** out);
CFS_API void cfs_sim_close(cfs_sim* sim);

/* Deterministic execution. Running twice on one handle is a no-op. */
CFS_API cfs_status cfs_sim_run(cfs_sim* sim);
/* Execution plus every applicable checker; CFS_ERR_CHECK_FAILED when any
 * checker rejects. The per-checker report is available either way. */
CFS_API cfs_status cfs_sim_check(cfs_sim* sim);

/* Results (valid until close). */
CFS_API const char* cfs_sim_trace_text(cfs_sim* sim);
CFS_API const char* cfs_sim_metrics_tsv(cfs_sim* sim);
CFS_API const char* cfs_sim_check_report(cfs_sim* sim);
CFS_API const char* cfs_sim_summary_json(cfs_sim* sim);
CFS_API uint64_t cfs_sim_trace_hash(cfs_sim* sim);
CFS_API const char* cfs_sim_last_error(cfs_sim* sim);

/* Built-in experiments; *out_tsv is heap-allocated, release with
 * cfs_string_free. */
CFS_API cfs_status cfs_sweep_log_size(uint64_t file_size_bytes,
                                      const uint64_t* log_sizes, int n_sizes,
                                      uint64_t seed, char** out_tsv);
CFS_API cfs_status cfs_sweep_recovery(const uint64_t* dataset_sizes,
                                      int n_sizes, uint64_t seed,
                                      char** out_tsv);
CFS_API void cfs_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CACHEFS_H */
