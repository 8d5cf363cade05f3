/*
 * engine.hpp
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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fs/libfs.hpp"
#include "harness/history.hpp"
#include "harness/lin_check.hpp"
#include "world/world.hpp"

namespace cfs::harness {

struct FaultSpec {
  enum class Kind { CrashNode, KillProc, RecoverNode };
  Kind kind = Kind::CrashNode;
  sim::Time at = 0;
  std::string node;
  std::string proc;
  media::CutSpec cut = media::CutSpec::all();
  // Processes restarted on a surviving node once the failure is detected.
  std::vector<std::pair<std::string, std::string>> restarts;  // proc -> node
};

// A deterministic experiment: topology comes from the cluster config,
// everything else from here. Identical scenarios produce identical traces.
struct Scenario {
  uint64_t seed = 1;
  fs::Mode mode = fs::Mode::Pessimistic;
  sim::Time duration_cap = 600 * sim::kSec;

  std::string kind = "seq_write";
  uint64_t processes = 1;
  KvSection workload;  // workload-specific knobs
  std::vector<FaultSpec> faults;
  // Explicit placement "p0:n1,p1:n2"; round-robin over nodes when empty.
  std::string placement;
  // Explicit start-order schedule for the contend workload.
  std::vector<uint32_t> schedule;

  static Result<Scenario> parse(const KvFile& f);
  static Result<Scenario> parse_text(const std::string& text);
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckResult> results;
  bool all_pass() const {
    for (const auto& r : results) {
      if (!r.pass) return false;
    }
    return true;
  }
  std::string text() const;
};

// Runs one scenario inside a fresh world: spawns the workload processes,
// injects the fault schedule, records history and ledgers, then audits.
class Engine {
 public:
  Engine(cluster::ClusterConfig cfg, Scenario sc);
  ~Engine();

  // Deterministic execution to quiescence. Returns ScenarioInvalid for
  // malformed scenarios.
  Status run();
  // run() plus every applicable checker.
  CheckReport check();

  world::World& world() { return *w_; }
  const History& history() const { return history_; }
  uint64_t trace_hash() const { return w_->trace.hash(); }
  std::string metrics_tsv() const { return w_->metrics.tsv(); }
  std::string summary_json(const CheckReport* report) const;

  struct AppendRec {
    sim::Time t;
    std::string proc;
    uint64_t inc;
    log::LogEntry entry;
  };
  const std::vector<AppendRec>& append_ledger() const { return appends_; }

  // --- individual checkers (also used by the acceptance suite) -------------

  CheckResult check_linearizable();
  CheckResult check_prefix();
  CheckResult check_convergence();
  CheckResult check_lease_safety() const;
  CheckResult check_epochs() const;
  CheckResult check_metrics_conservation() const;
  CheckResult check_rejoin(const std::string& node);

  // Expected full state from replaying the append ledger (all entries).
  fs::FsImage replay_all() const;

  uint64_t lease_violations() const { return lease_violations_; }
  const std::map<std::string, std::vector<fs::InodeNum>>& rejoin_sets() const {
    return rejoin_invalidated_;
  }

 private:
  friend class Sweeps;

  void install_hooks();
  sim::Task run_faults();
  sim::Task run_workload(bool* done);
  sim::Co<Result<Unit>> workload_seq_write(fs::LibFs* p, uint64_t index);
  sim::Co<Result<Unit>> workload_kv_mix(fs::LibFs* p, uint64_t index);
  sim::Co<Result<Unit>> workload_maildir(fs::LibFs* p, uint64_t index);
  sim::Co<Result<Unit>> workload_sharded_ops(fs::LibFs* p, uint64_t index);
  sim::Co<Result<Unit>> workload_recovery_probe(fs::LibFs* p, uint64_t index);
  sim::Co<Result<Unit>> run_contend(bool* done);
  sim::Co<Result<Unit>> quiesce_evict();

  // History-recording wrappers around the POSIX surface.
  sim::Co<Result<Unit>> rec_open_write_close(fs::LibFs* p,
                                             const std::string& path,
                                             uint64_t off, Bytes data,
                                             bool do_fsync);
  struct ContendPlan {
    std::vector<std::vector<HistoryOp>> per_proc;  // args only
  };
  ContendPlan make_contend_plan();
  sim::Co<Result<Unit>> exec_recorded(fs::LibFs* p, HistoryOp plan);

  std::string proc_node(uint64_t index) const;

  cluster::ClusterConfig cfg_;
  Scenario sc_;
  std::unique_ptr<world::World> w_;
  History history_;
  std::vector<AppendRec> appends_;
  // Last sync (fsync in pessimistic, dsync in optimistic) per (proc, inc):
  // through-seq and completion time.
  std::map<std::pair<std::string, uint64_t>, std::pair<uint64_t, sim::Time>>
      synced_;
  std::map<std::pair<std::string, uint64_t>, uint64_t> acked_;
  uint64_t lease_violations_ = 0;
  std::map<std::string, sim::Time> crash_time_;
  std::map<std::string, std::vector<fs::InodeNum>> rejoin_invalidated_;
  std::map<std::string, std::set<fs::InodeNum>> downtime_writes_;
  std::function<void(const media::NodeId&)> install_failover_hook_;
  uint64_t warmup_done_ = 0;
  bool ran_ = false;
  bool workload_failed_ = false;
  std::string workload_error_;
};

}  // namespace cfs::harness
