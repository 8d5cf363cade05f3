/*
 * sweeps.hpp
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

#pragma once

#include <string>
#include <vector>

#include "harness/engine.hpp"

namespace cfs::harness {

// Update-log size sensitivity: one process writes a file sequentially at
// 4KB granularity under different log capacities.
struct LogSweepRow {
  uint64_t log_capacity = 0;
  uint64_t digests = 0;
  uint64_t sim_ns = 0;
  double throughput = 0;  // bytes per simulated second
  double normalized = 0;  // against the largest log
};

struct LogSweepResult {
  std::vector<LogSweepRow> rows;
  std::string tsv() const;
};

LogSweepResult sweep_log_size(uint64_t file_size,
                              const std::vector<uint64_t>& log_sizes,
                              uint64_t seed = 1);

// Fail-over cost against dataset size: hot-backup fail-over only evicts the
// per-process log, so its work should not scale with the dataset, while a
// rebuild-from-scratch baseline does.
struct RecoveryRow {
  uint64_t dataset_bytes = 0;
  uint64_t detect_ns = 0;
  uint64_t failover_work_ns = 0;
  uint64_t failover_work_bytes = 0;
  uint64_t first_op_ns = 0;
  uint64_t cold_rebuild_bytes = 0;  // modeled disaggregated baseline
};

struct RecoverySweepResult {
  std::vector<RecoveryRow> rows;
  std::string tsv() const;
};

RecoverySweepResult sweep_recovery(const std::vector<uint64_t>& dataset_sizes,
                                   uint64_t seed = 1);

}  // namespace cfs::harness
