/*
 * capi.cpp
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

#include "cachefs/cachefs.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "harness/engine.hpp"
#include "harness/sweeps.hpp"

using cfs::harness::CheckReport;
using cfs::harness::Engine;
using cfs::harness::Scenario;

struct cfs_sim {
  std::unique_ptr<Engine> engine;
  bool ran = false;
  bool checked = false;
  CheckReport report;
  std::string last_error;
  // Cached result strings (stable addresses for the C surface).
  std::string trace, metrics, report_text, summary;
};

namespace {

cfs_status fail(cfs_sim* sim, cfs_status code, const std::string& msg) {
  if (sim) sim->last_error = msg;
  return code;
}

cfs_status read_file(const char* path, std::string* out) {
  std::ifstream in(path);
  if (!in) return CFS_ERR_IO;
  std::stringstream ss;
  ss << in.rdbuf();
  *out = ss.str();
  return CFS_OK;
}

cfs_status open_common(const std::string& cluster_text,
                       const std::string& scenario_text, cfs_sim** out) {
  auto cfg = cfs::cluster::ClusterConfig::parse_text(cluster_text);
  if (!cfg.ok()) return CFS_ERR_PARSE;
  auto sc = Scenario::parse_text(scenario_text);
  if (!sc.ok()) return CFS_ERR_PARSE;
  auto* sim = new cfs_sim;
  sim->engine = std::make_unique<Engine>(*cfg, *sc);
  *out = sim;
  return CFS_OK;
}

}  // namespace

extern "C" {

const char* cfs_version(void) { return "cachefs 1.0.0"; }

const char* cfs_status_name(cfs_status s) {
  switch (s) {
    case CFS_OK: return "ok";
    case CFS_ERR_INVALID_ARG: return "invalid-argument";
    case CFS_ERR_PARSE: return "parse-error";
    case CFS_ERR_IO: return "io-error";
    case CFS_ERR_RUNTIME: return "runtime-error";
    case CFS_ERR_CHECK_FAILED: return "check-failed";
  }
  return "unknown";
}

cfs_status cfs_sim_open(const char* cluster_config_path,
                        const char* scenario_path, cfs_sim** out) {
  if (!cluster_config_path || !scenario_path || !out) {
    return CFS_ERR_INVALID_ARG;
  }
  std::string cluster_text, scenario_text;
  if (read_file(cluster_config_path, &cluster_text) != CFS_OK) {
    return CFS_ERR_IO;
  }
  if (read_file(scenario_path, &scenario_text) != CFS_OK) return CFS_ERR_IO;
  return open_common(cluster_text, scenario_text, out);
}

cfs_status cfs_sim_open_text(const char* cluster_config_text,
                             const char* scenario_text, cfs_sim** out) {
  if (!cluster_config_text || !scenario_text || !out) {
    return CFS_ERR_INVALID_ARG;
  }
  return open_common(cluster_config_text, scenario_text, out);
}

void cfs_sim_close(cfs_sim* sim) { delete sim; }

cfs_status cfs_sim_run(cfs_sim* sim) {
  if (!sim) return CFS_ERR_INVALID_ARG;
  if (sim->ran) return CFS_OK;
  auto st = sim->engine->run();
  if (!st.ok()) {
    return fail(sim, CFS_ERR_RUNTIME, std::string(cfs::err_name(st.error())));
  }
  sim->ran = true;
  return CFS_OK;
}

cfs_status cfs_sim_check(cfs_sim* sim) {
  if (!sim) return CFS_ERR_INVALID_ARG;
  if (!sim->checked) {
    sim->report = sim->engine->check();
    sim->ran = true;
    sim->checked = true;
  }
  if (!sim->report.all_pass()) {
    return fail(sim, CFS_ERR_CHECK_FAILED, sim->report.text());
  }
  return CFS_OK;
}

const char* cfs_sim_trace_text(cfs_sim* sim) {
  if (!sim || !sim->ran) return "";
  sim->trace = sim->engine->world().trace.text();
  return sim->trace.c_str();
}

const char* cfs_sim_metrics_tsv(cfs_sim* sim) {
  if (!sim || !sim->ran) return "";
  sim->metrics = sim->engine->metrics_tsv();
  return sim->metrics.c_str();
}

const char* cfs_sim_check_report(cfs_sim* sim) {
  if (!sim || !sim->checked) return "";
  sim->report_text = sim->report.text();
  return sim->report_text.c_str();
}

const char* cfs_sim_summary_json(cfs_sim* sim) {
  if (!sim || !sim->ran) return "";
  sim->summary =
      sim->engine->summary_json(sim->checked ? &sim->report : nullptr);
  return sim->summary.c_str();
}

uint64_t cfs_sim_trace_hash(cfs_sim* sim) {
  if (!sim || !sim->ran) return 0;
  return sim->engine->trace_hash();
}

const char* cfs_sim_last_error(cfs_sim* sim) {
  return sim ? sim->last_error.c_str() : "";
}

cfs_status cfs_sweep_log_size(uint64_t file_size_bytes,
                              const uint64_t* log_sizes, int n_sizes,
                              uint64_t seed, char** out_tsv) {
  if (!log_sizes || n_sizes <= 0 || !out_tsv) return CFS_ERR_INVALID_ARG;
  std::vector<uint64_t> sizes(log_sizes, log_sizes + n_sizes);
  auto result = cfs::harness::sweep_log_size(file_size_bytes, sizes, seed);
  std::string tsv = result.tsv();
  *out_tsv = static_cast<char*>(std::malloc(tsv.size() + 1));
  std::memcpy(*out_tsv, tsv.c_str(), tsv.size() + 1);
  return CFS_OK;
}

cfs_status cfs_sweep_recovery(const uint64_t* dataset_sizes, int n_sizes,
                              uint64_t seed, char** out_tsv) {
  if (!dataset_sizes || n_sizes <= 0 || !out_tsv) return CFS_ERR_INVALID_ARG;
  std::vector<uint64_t> sizes(dataset_sizes, dataset_sizes + n_sizes);
  auto result = cfs::harness::sweep_recovery(sizes, seed);
  std::string tsv = result.tsv();
  *out_tsv = static_cast<char*>(std::malloc(tsv.size() + 1));
  std::memcpy(*out_tsv, tsv.c_str(), tsv.size() + 1);
  return CFS_OK;
}

void cfs_string_free(char* s) { std::free(s); }

}  // extern "C"
