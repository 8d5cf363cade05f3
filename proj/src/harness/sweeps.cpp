/*
 * sweeps.cpp
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

#include "harness/sweeps.hpp"

#include <sstream>

namespace cfs::harness {

namespace {

std::string size_str(uint64_t bytes) {
  std::ostringstream out;
  if (bytes >= (1ull << 20) && bytes % (1ull << 20) == 0) {
    out << (bytes >> 20) << "MB";
  } else if (bytes >= (1ull << 10) && bytes % (1ull << 10) == 0) {
    out << (bytes >> 10) << "KB";
  } else {
    out << bytes << "B";
  }
  return out.str();
}

}  // namespace

std::string LogSweepResult::tsv() const {
  std::ostringstream out;
  out << "log_capacity\tdigests\tsim_ms\tthroughput_mb_s\tnormalized\n";
  for (const auto& r : rows) {
    out << size_str(r.log_capacity) << '\t' << r.digests << '\t'
        << r.sim_ns / 1000000 << '\t'
        << static_cast<uint64_t>(r.throughput / 1e6) << '\t' << r.normalized
        << '\n';
  }
  return out.str();
}

LogSweepResult sweep_log_size(uint64_t file_size,
                              const std::vector<uint64_t>& log_sizes,
                              uint64_t seed) {
  LogSweepResult out;
  for (uint64_t cap : log_sizes) {
    std::ostringstream cl;
    cl << "[node n1]\n[node n2]\n[chain /shard0]\nreplicas = n1, n2\n"
       << "[defaults]\nlog_capacity = " << cap << "\nread_cache = 1MB\n"
       << "shared_journal = " << std::max<uint64_t>(file_size * 4, 64u << 20)
       << "\nshared_ssd = 64MB\nhot_capacity = " << file_size * 2 << "\n";
    std::ostringstream sc;
    sc << "seed = " << seed << "\nmode = pessimistic\n[workload]\n"
       << "kind = seq_write\nprocesses = 1\nfile_size = " << file_size
       << "\nio_size = 4KB\nprocs = p0:n1\n";
    auto cfg = cluster::ClusterConfig::parse_text(cl.str());
    auto scenario = Scenario::parse_text(sc.str());
    CFS_ASSERT(cfg.ok() && scenario.ok());
    Engine eng(*cfg, *scenario);
    auto st = eng.run();
    CFS_ASSERT(st.ok());
    LogSweepRow row;
    row.log_capacity = cap;
    row.digests = eng.world().metrics.get("libfs_digests");
    row.sim_ns = eng.world().metrics.get("seq_write_done_ns_p0");
    row.throughput =
        static_cast<double>(file_size) * 1e9 / static_cast<double>(row.sim_ns);
    out.rows.push_back(row);
  }
  double best = 0;
  for (const auto& r : out.rows) best = std::max(best, r.throughput);
  for (auto& r : out.rows) r.normalized = r.throughput / best;
  return out;
}

std::string RecoverySweepResult::tsv() const {
  std::ostringstream out;
  out << "dataset\tdetect_ms\tfailover_work_us\tfailover_work_bytes"
         "\tfirst_op_us\tcold_rebuild_bytes\n";
  for (const auto& r : rows) {
    out << size_str(r.dataset_bytes) << '\t' << r.detect_ns / 1000000 << '\t'
        << r.failover_work_ns / 1000 << '\t' << r.failover_work_bytes << '\t'
        << r.first_op_ns / 1000 << '\t' << r.cold_rebuild_bytes << '\n';
  }
  return out.str();
}

RecoverySweepResult sweep_recovery(const std::vector<uint64_t>& dataset_sizes,
                                   uint64_t seed) {
  RecoverySweepResult out;
  for (uint64_t dataset : dataset_sizes) {
    // Phase layout: the dataset is written and digested, then a fixed tail
    // workload fills the log, then the head crashes. Hot-backup fail-over
    // only has to evict that tail, regardless of the dataset size.
    std::ostringstream cl;
    cl << "[node n1]\n[node n2]\n[chain /shard0]\nreplicas = n1, n2\n"
       << "[defaults]\nlog_capacity = 8MB\nread_cache = 1MB\n"
       << "shared_journal = " << std::max<uint64_t>(dataset * 6, 64u << 20)
       << "\nshared_ssd = 64MB\nhot_capacity = " << dataset * 3 << "\n";
    std::ostringstream sc;
    sc << "seed = " << seed << "\nmode = pessimistic\n[workload]\n"
       << "kind = recovery_probe\nprocesses = 1\nprocs = p0:n1\n"
       << "dataset = " << dataset << "\ntail = 256KB\n"
       << "[fault]\nat = 30s\nkind = crash_node\nnode = n1\n"
       << "cut = persisted_only\nrestart = p0:n2\n";
    auto cfg = cluster::ClusterConfig::parse_text(cl.str());
    auto scenario = Scenario::parse_text(sc.str());
    CFS_ASSERT(cfg.ok() && scenario.ok());
    Engine eng(*cfg, *scenario);
    auto st = eng.run();
    CFS_ASSERT(st.ok());
    RecoveryRow row;
    row.dataset_bytes = dataset;
    row.detect_ns = eng.world().metrics.get("detect_ns_n1");
    row.failover_work_ns = eng.world().metrics.get("failover_work_ns");
    row.failover_work_bytes = eng.world().metrics.get("failover_work_bytes");
    row.first_op_ns = eng.world().metrics.get("first_op_ns_after_n1");
    // Disaggregated baseline: the replacement cache starts cold and must
    // re-read the whole dataset to return to full performance.
    row.cold_rebuild_bytes = dataset;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace cfs::harness
