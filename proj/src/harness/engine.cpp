/*
 * engine.cpp
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

#include "harness/engine.hpp"

#include <algorithm>
#include <sstream>

#include "cluster/cluster_manager.hpp"
#include "kernfs/kernfs.hpp"
#include "repl/mode_semantics.hpp"

namespace cfs::harness {

using fs::LibFs;

namespace {

Bytes pattern_bytes(uint64_t n, uint64_t tag) {
  Bytes out(n);
  for (uint64_t i = 0; i < n; i++) {
    out[i] = static_cast<uint8_t>((tag * 131 + i) & 0xFF);
  }
  return out;
}

media::CutSpec parse_cut(const std::string& s) {
  if (s == "persisted_only") return media::CutSpec::persisted_only();
  if (s == "random") return media::CutSpec::random(1);
  if (s.rfind("global:", 0) == 0) {
    return media::CutSpec::global_index(
        std::strtoull(s.c_str() + 7, nullptr, 10));
  }
  return media::CutSpec::all();
}

}  // namespace

Result<Scenario> Scenario::parse(const KvFile& f) {
  Scenario sc;
  sc.seed = f.root.get_u64("seed", 1);
  std::string mode = f.root.get("mode", "pessimistic");
  if (mode == "optimistic") {
    sc.mode = fs::Mode::Optimistic;
  } else if (mode == "pessimistic") {
    sc.mode = fs::Mode::Pessimistic;
  } else {
    return Err::ScenarioInvalid;
  }
  sc.duration_cap = f.root.get_time_ns("duration_cap", sc.duration_cap);
  if (const KvSection* w = f.first("workload")) {
    sc.workload = *w;
    sc.kind = w->get("kind", "seq_write");
    sc.processes = w->get_u64("processes", 1);
    sc.placement = w->get("procs", "");
    for (const auto& tok : w->get_list("schedule")) {
      sc.schedule.push_back(
          static_cast<uint32_t>(std::strtoul(tok.c_str(), nullptr, 10)));
    }
  }
  for (const KvSection* fx : f.all("fault")) {
    FaultSpec fault;
    std::string kind = fx->get("kind", "crash_node");
    if (kind == "crash_node") fault.kind = FaultSpec::Kind::CrashNode;
    else if (kind == "kill_proc") fault.kind = FaultSpec::Kind::KillProc;
    else if (kind == "recover_node") fault.kind = FaultSpec::Kind::RecoverNode;
    else return Err::ScenarioInvalid;
    fault.at = fx->get_time_ns("at", 0);
    fault.node = fx->get("node", "");
    fault.proc = fx->get("proc", "");
    fault.cut = parse_cut(fx->get("cut", "all"));
    for (const auto& r : fx->get_list("restart")) {
      size_t colon = r.find(':');
      if (colon == std::string::npos) return Err::ScenarioInvalid;
      fault.restarts.emplace_back(r.substr(0, colon), r.substr(colon + 1));
    }
    sc.faults.push_back(fault);
  }
  return sc;
}

Result<Scenario> Scenario::parse_text(const std::string& text) {
  auto kv = parse_kv_text(text);
  if (!kv.ok()) return kv.error();
  return parse(*kv);
}

std::string CheckReport::text() const {
  std::ostringstream out;
  for (const auto& r : results) {
    out << (r.pass ? "PASS" : "FAIL") << '\t' << r.name;
    if (!r.detail.empty()) out << '\t' << r.detail;
    out << '\n';
  }
  return out.str();
}

Engine::Engine(cluster::ClusterConfig cfg, Scenario sc)
    : cfg_(std::move(cfg)), sc_(std::move(sc)) {}

Engine::~Engine() = default;

std::string Engine::proc_node(uint64_t index) const {
  if (!sc_.placement.empty()) {
    std::stringstream ss(sc_.placement);
    std::string item;
    uint64_t i = 0;
    while (std::getline(ss, item, ',')) {
      size_t colon = item.find(':');
      if (i == index && colon != std::string::npos) {
        std::string node = item.substr(colon + 1);
        node.erase(0, node.find_first_not_of(" \t"));
        return node;
      }
      i++;
    }
  }
  return cfg_.nodes[index % cfg_.nodes.size()].id;
}

void Engine::install_hooks() {
  w_->append_hook = [this](const std::string& proc, uint64_t inc,
                           const log::LogEntry& e) {
    appends_.push_back(AppendRec{w_->loop.now(), proc, inc, e});
    // Ground truth for rejoin soundness: inodes written while a node that
    // replicates this subtree is down.
    for (const auto& [node, t] : crash_time_) {
      if (w_->cluster().status(node) == cluster::NodeStatus::Alive) continue;
      const auto* chain = cfg_.chain_for_subtree(e.subtree);
      if (!chain) continue;
      if (!cfg_.node_in_chain(node, *chain) && chain->reserve != node) continue;
      downtime_writes_[node].insert(e.inode);
    }
  };
  w_->ack_hook = [this](const std::string& proc, uint64_t inc, uint64_t seq) {
    auto& cur = acked_[{proc, inc}];
    cur = std::max(cur, seq);
  };
  w_->lease_event_hook = [this](const std::string&) {
    // Continuous safety audit over every manager's live table.
    std::vector<coherence::Lease> live;
    for (const auto& kid : w_->all_kernfs_ids()) {
      auto* k = w_->kernfs_by_id(kid);
      if (!k || !w_->node_alive(k->node())) continue;
      for (const auto& l : k->lease_table().all()) {
        if (w_->loop.now() < l.expiry) live.push_back(l);
      }
    }
    for (size_t i = 0; i < live.size(); i++) {
      for (size_t j = i + 1; j < live.size(); j++) {
        if (live[i].holder == live[j].holder) continue;
        if (coherence::leases_conflict(live[i], live[j])) {
          lease_violations_++;
        }
      }
    }
  };
  w_->failure_hook = [this](const media::NodeId& node, uint64_t) {
    w_->metrics.set("detect_ns_" + node,
                    w_->loop.now() - crash_time_[node]);
  };
  w_->rejoin_hook = [this](const media::NodeId& node,
                           const std::vector<fs::InodeNum>& inos) {
    rejoin_invalidated_[node] = inos;
    w_->metrics.set("rejoin_done_ns_" + node, w_->loop.now());
  };
  install_failover_hook_ = [this](const media::NodeId& node) {
    for (const auto& fault : sc_.faults) {
      if (fault.kind != FaultSpec::Kind::CrashNode || fault.node != node) {
        continue;
      }
      for (const auto& [proc, target] : fault.restarts) {
        LibFs* fresh = w_->restart_process(proc, target);
        // First post-fail-over operation: measures time back to service.
        [](Engine* eng, LibFs* p, media::NodeId n) -> sim::Task {
          sim::Time start = eng->w_->loop.now();
          auto names = co_await p->readdir("/" );
          (void)names;
          for (const auto& c : eng->cfg_.chains) {
            auto listing = co_await p->readdir(c.root);
            if (listing.ok() && !listing->empty()) {
              auto fd = co_await p->open(
                  fs::join_path(c.root, listing->front()), fs::O_RD);
              if (fd.ok()) {
                co_await p->read(*fd, 4096);
                co_await p->close(*fd);
              }
              break;
            }
          }
          eng->w_->metrics.set("first_op_ns_after_" + n,
                               eng->w_->loop.now() - start);
        }(this, fresh, node);
      }
    }
  };
}

sim::Task Engine::run_faults() {
  for (const auto& fault : sc_.faults) {
    FaultSpec f = fault;
    w_->loop.schedule_at(f.at, [this, f] {
      switch (f.kind) {
        case FaultSpec::Kind::CrashNode: {
          crash_time_[f.node] = w_->loop.now();
          auto rep = w_->crash_node(f.node, f.cut);
          if (rep.ok()) {
            w_->metrics.set("crash_unpersisted_" + f.node, rep->unpersisted);
            w_->metrics.set("crash_kept_" + f.node, rep->kept);
          }
          break;
        }
        case FaultSpec::Kind::KillProc:
          w_->kill_process(f.proc);
          break;
        case FaultSpec::Kind::RecoverNode:
          w_->recover_node(f.node);
          break;
      }
    });
  }
  co_return;
}

Status Engine::run() {
  if (ran_) return Status{};
  if (sc_.processes == 0 || cfg_.nodes.empty() || cfg_.chains.empty()) {
    return Err::ScenarioInvalid;
  }
  std::vector<world::ProcSpec> procs;
  for (uint64_t i = 0; i < sc_.processes; i++) {
    world::ProcSpec spec;
    spec.name = "p" + std::to_string(i);
    spec.node = proc_node(i);
    spec.cred = fs::Cred{1, 1};
    spec.mode = sc_.mode;
    procs.push_back(spec);
  }
  w_ = std::make_unique<world::World>(cfg_, sc_.seed);
  install_hooks();
  w_->build(procs);
  w_->cluster().failover_hook = install_failover_hook_;
  run_faults();

  bool done = false;
  run_workload(&done);
  w_->loop.run_while([&] { return !done; }, sc_.duration_cap);
  if (!done) return Err::ScenarioInvalid;  // livelock guard

  // Faults may land after the workload: give the periodic failure
  // detector and the recovery protocol time to finish.
  sim::Time settle = 0;
  sim::Time last_crash = 0;
  for (const auto& f : sc_.faults) {
    if (f.kind == FaultSpec::Kind::CrashNode) {
      last_crash = std::max(last_crash, f.at);
      settle = std::max(settle, f.at + cfg_.heartbeat_interval_ns +
                                    cfg_.heartbeat_timeout_ns +
                                    500 * sim::kMsec);
    } else if (f.kind == FaultSpec::Kind::RecoverNode) {
      settle = std::max(settle,
                        std::max(f.at, last_crash) +
                            cfg_.recovery_restart_delay_ns +
                            cfg_.lease_term_ns + cfg_.lease_grace_ns +
                            1 * sim::kSec);
    } else {
      settle = std::max(settle, f.at + 100 * sim::kMsec);
    }
  }
  if (settle > w_->loop.now()) w_->loop.run_until(settle);

  // Drain protocol work, then flush surviving logs so the digested state
  // is the complete visible state.
  w_->loop.run_until_quiesce(w_->loop.now() + sc_.duration_cap);
  bool flushed = false;
  [](Engine* eng, bool* flag) -> sim::Task {
    co_await eng->quiesce_evict();
    *flag = true;
  }(this, &flushed);
  w_->loop.run_while([&] { return !flushed; }, w_->loop.now() + sc_.duration_cap);
  w_->loop.run_until_quiesce(w_->loop.now() + sc_.duration_cap);
  ran_ = true;
  return Status{};
}

sim::Co<Result<Unit>> Engine::quiesce_evict() {
  for (uint64_t i = 0; i < sc_.processes; i++) {
    LibFs* p = w_->libfs("p" + std::to_string(i));
    if (!p || p->dead()) continue;
    if (p->update_log().digested_seq() == p->update_log().tail_seq()) continue;
    co_await p->evict_private_cache();
  }
  co_return Unit{};
}

// --- workloads -----------------------------------------------------------------

sim::Task Engine::run_workload(bool* done) {
  if (sc_.kind == "contend") {
    co_await run_contend(done);
    co_return;
  }
  uint64_t remaining = sc_.processes;
  sim::Future<Unit> all_done;
  for (uint64_t i = 0; i < sc_.processes; i++) {
    LibFs* p = w_->libfs("p" + std::to_string(i));
    CFS_ASSERT(p);
    [](Engine* eng, LibFs* p, uint64_t index, uint64_t* remaining,
       sim::Future<Unit> all) -> sim::Task {
      Result<Unit> r = Unit{};
      if (eng->sc_.kind == "seq_write") {
        r = co_await eng->workload_seq_write(p, index);
      } else if (eng->sc_.kind == "kv_mix") {
        r = co_await eng->workload_kv_mix(p, index);
      } else if (eng->sc_.kind == "maildir") {
        r = co_await eng->workload_maildir(p, index);
      } else if (eng->sc_.kind == "sharded_ops") {
        r = co_await eng->workload_sharded_ops(p, index);
      } else if (eng->sc_.kind == "recovery_probe") {
        r = co_await eng->workload_recovery_probe(p, index);
      } else {
        eng->workload_failed_ = true;
        eng->workload_error_ = "unknown workload " + eng->sc_.kind;
      }
      if (!r.ok() && r.error() != Err::DstFailed) {
        // DstFailed is the expected way scripts die in crash scenarios.
        eng->workload_failed_ = true;
        eng->workload_error_ = std::string(err_name(r.error()));
      }
      if (--*remaining == 0) all.try_fulfill(Unit{});
    }(this, p, i, &remaining, all_done);
  }
  co_await all_done;
  *done = true;
}

sim::Co<Result<Unit>> Engine::workload_seq_write(LibFs* p, uint64_t index) {
  uint64_t file_size = sc_.workload.get_size("file_size", 1u << 20);
  uint64_t io = sc_.workload.get_size("io_size", 4096);
  uint64_t fsync_every = sc_.workload.get_u64("fsync_every", 0);
  std::string dir = sc_.workload.get("target",
                                     cfg_.chains[index % cfg_.chains.size()].root);
  std::string path = dir + "/" + p->name() + ".dat";

  uint64_t open_id;
  {
    auto* rec = history_.begin_op(p->name(), HOp::Open, w_->loop.now());
    rec->path = path;
    rec->flags = fs::O_WR | fs::O_CREAT_;
    open_id = rec->id;
  }
  auto fd = co_await p->open(path, fs::O_WR | fs::O_CREAT_, 0644);
  {
    HistoryOp& rec = history_.ops[open_id];
    rec.response = w_->loop.now();
    rec.completed = true;
    rec.err = fd.ok() ? Err::Ok : fd.error();
  }
  if (!fd.ok()) co_return fd.error();

  uint64_t ops = (file_size + io - 1) / io;
  for (uint64_t i = 0; i < ops; i++) {
    auto wr = co_await p->pwrite(*fd, i * io, pattern_bytes(io, index * 1000 + i));
    if (!wr.ok()) co_return wr.error();
    if (fsync_every && (i + 1) % fsync_every == 0) {
      uint64_t fid = history_.begin_op(p->name(), HOp::Fsync,
                                       w_->loop.now())->id;
      history_.ops[fid].path = path;
      auto s = co_await p->fsync(*fd);
      HistoryOp& frec = history_.ops[fid];
      frec.response = w_->loop.now();
      frec.completed = true;
      frec.err = s.ok() ? Err::Ok : s.error();
      if (s.ok()) {
        synced_[{p->name(), p->incarnation()}] = {
            p->update_log().replicated_seq(), w_->loop.now()};
      }
    }
  }
  w_->metrics.set("seq_write_done_ns_" + p->name(), w_->loop.now());
  co_return Unit{};
}

sim::Co<Result<Unit>> Engine::workload_kv_mix(LibFs* p, uint64_t index) {
  uint64_t files = sc_.workload.get_u64("files", 8);
  uint64_t value = sc_.workload.get_size("value_size", 1024);
  uint64_t ops = sc_.workload.get_u64("ops_per_proc", 50);
  double read_frac = sc_.workload.get_f64("read_frac", 0.5);
  bool sync_writes = sc_.workload.get_bool("sync_writes", true);
  std::string dir = sc_.workload.get("target",
                                     cfg_.chains[index % cfg_.chains.size()].root);
  sim::Rng rng(sc_.seed * 977 + index);

  std::vector<int> fds;
  for (uint64_t fidx = 0; fidx < files; fidx++) {
    std::string path = dir + "/" + p->name() + "-kv" + std::to_string(fidx);
    auto fd = co_await p->open(path, fs::O_WR | fs::O_RD | fs::O_CREAT_, 0644);
    if (!fd.ok()) co_return fd.error();
    fds.push_back(*fd);
  }
  for (uint64_t i = 0; i < ops; i++) {
    uint64_t fidx = rng.below(files);
    uint64_t slot = rng.below(16);
    if (rng.unit() < read_frac) {
      auto r = co_await p->pread(fds[fidx], slot * value, value);
      if (!r.ok() && r.error() != Err::Ok) co_return r.error();
    } else {
      auto wr = co_await p->pwrite(fds[fidx], slot * value,
                                   pattern_bytes(value, i * 31 + index));
      if (!wr.ok()) co_return wr.error();
      if (sync_writes) {
        uint64_t fid = history_.begin_op(
            p->name(),
            sc_.mode == fs::Mode::Optimistic ? HOp::Dsync : HOp::Fsync,
            w_->loop.now())->id;
        history_.ops[fid].path = dir;
        Result<Unit> s = sc_.mode == fs::Mode::Optimistic
                             ? co_await p->dsync(fds[fidx])
                             : co_await p->fsync(fds[fidx]);
        HistoryOp& frec = history_.ops[fid];
        frec.response = w_->loop.now();
        frec.completed = true;
        frec.err = s.ok() ? Err::Ok : s.error();
        if (s.ok()) {
          synced_[{p->name(), p->incarnation()}] = {
              p->update_log().replicated_seq(), w_->loop.now()};
        }
      }
    }
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> Engine::workload_maildir(LibFs* p, uint64_t index) {
  uint64_t deliveries = sc_.workload.get_u64("deliveries", 20);
  uint64_t msg_size = sc_.workload.get_size("msg_size", 8192);
  std::string pattern = sc_.workload.get("pattern", "private");
  bool queue_journal = sc_.workload.get_bool("queue_journal", true);

  uint64_t warmup = sc_.workload.get_u64("warmup_deliveries", 0);
  if (warmup >= deliveries) warmup = 0;

  // Per-process spool directories, one per shard actually delivered to:
  // the final rename must stay within one subtree.
  std::set<uint32_t> spooled;
  auto ensure_spool = [&](uint64_t chain_idx) -> sim::Co<Result<std::string>> {
    std::string spool =
        cfg_.chains[chain_idx].root + "/spool-" + p->name();
    if (!spooled.count(chain_idx)) {
      auto mk = co_await p->mkdir(spool, 0755);
      if (!mk.ok() && mk.error() != Err::EEXIST_) co_return mk.error();
      spooled.insert(static_cast<uint32_t>(chain_idx));
    }
    co_return spool;
  };

  sim::Rng rng(sc_.seed * 1299709 + index);
  for (uint64_t i = 0; i < deliveries; i++) {
    if (warmup > 0 && i == warmup) {
      // Steady state: locality metrics restart here.
      if (++warmup_done_ == sc_.processes) {
        w_->metrics.reset("lease_remote_hops");
        w_->metrics.set("steady_state", 1);
      }
      while (warmup_done_ < sc_.processes) {
        co_await sim::sleep_for(w_->loop, 100 * sim::kUsec);
        if (p->dead()) co_return Err::DstFailed;
      }
    }
    // Choose the recipient maildir by sharding pattern.
    uint64_t chain_idx;
    if (pattern == "private") {
      chain_idx = index % cfg_.chains.size();
    } else if (pattern == "sharded") {
      // Mostly the home shard, with an occasional cross-shard recipient.
      chain_idx = (i % 8 == 7) ? (index + 1) % cfg_.chains.size()
                               : index % cfg_.chains.size();
    } else {  // round_robin
      chain_idx = (index + i) % cfg_.chains.size();
    }
    std::string maildir = cfg_.chains[chain_idx].root;
    auto spool_r = co_await ensure_spool(chain_idx);
    if (!spool_r.ok()) co_return spool_r.error();
    std::string spool = *spool_r;

    // Queue journal: written then removed once the delivery commits; the
    // coalesced replication stream drops it entirely.
    std::string journal = spool + "/journal-" + std::to_string(i);
    if (queue_journal) {
      auto jfd = co_await p->open(journal, fs::O_WR | fs::O_CREAT_, 0600);
      if (!jfd.ok()) co_return jfd.error();
      auto jw = co_await p->write(*jfd, pattern_bytes(msg_size, i));
      if (!jw.ok()) co_return jw.error();
      co_await p->close(*jfd);
    }

    std::string tmp = spool + "/tmp-" + std::to_string(i);
    auto fd = co_await p->open(tmp, fs::O_WR | fs::O_CREAT_, 0644);
    if (!fd.ok()) co_return fd.error();
    auto wr = co_await p->write(*fd, pattern_bytes(msg_size, 7000 + i));
    if (!wr.ok()) co_return wr.error();
    co_await p->close(*fd);

    std::string final_name =
        maildir + "/mail-" + p->name() + "-" + std::to_string(i);
    auto rn = co_await p->rename(tmp, final_name);
    if (!rn.ok()) co_return rn.error();

    if (queue_journal) {
      auto ul = co_await p->unlink(journal);
      if (!ul.ok()) co_return ul.error();
    }

    // Commit the delivery.
    auto cfd = co_await p->open(final_name, fs::O_RD);
    if (!cfd.ok()) co_return cfd.error();
    Result<Unit> s = sc_.mode == fs::Mode::Optimistic
                         ? co_await p->dsync(*cfd)
                         : co_await p->fsync(*cfd);
    if (!s.ok()) co_return s.error();
    synced_[{p->name(), p->incarnation()}] = {
        p->update_log().replicated_seq(), w_->loop.now()};
    co_await p->close(*cfd);
    w_->metrics.add("deliveries");
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> Engine::workload_sharded_ops(LibFs* p, uint64_t index) {
  uint64_t ops = sc_.workload.get_u64("ops_per_proc", 24);
  uint64_t warmup = sc_.workload.get_u64("warmup_ops", 6);
  uint64_t io = sc_.workload.get_size("io_size", 4096);
  std::string pattern = sc_.workload.get("pattern", "private");

  auto target_dir = [&](uint64_t i) -> std::string {
    uint64_t chain_idx;
    if (pattern == "private" || pattern == "single_manager") {
      chain_idx = index % cfg_.chains.size();
    } else if (pattern == "sharded") {
      chain_idx = (i % 8 == 7) ? (index + 1) % cfg_.chains.size()
                               : index % cfg_.chains.size();
    } else {  // round_robin
      chain_idx = (index + i) % cfg_.chains.size();
    }
    return cfg_.chains[chain_idx].root;
  };

  if (warmup >= ops) warmup = 0;
  for (uint64_t i = 0; i < ops; i++) {
    if (warmup > 0 && i == warmup) {
      // Steady state begins: locality is measured from here on.
      if (++warmup_done_ == sc_.processes) {
        w_->metrics.reset("lease_remote_hops");
        w_->metrics.set("steady_state", 1);
      }
      while (warmup_done_ < sc_.processes) {
        co_await sim::sleep_for(w_->loop, 100 * sim::kUsec);
        if (p->dead()) co_return Err::DstFailed;
      }
    }
    std::string dir = target_dir(i);
    std::string tmp = dir + "/t-" + p->name() + "-" + std::to_string(i);
    std::string final_name = dir + "/f-" + p->name() + "-" + std::to_string(i);
    auto fd = co_await p->open(tmp, fs::O_WR | fs::O_CREAT_, 0644);
    if (!fd.ok()) co_return fd.error();
    auto wr = co_await p->write(*fd, pattern_bytes(io, i));
    if (!wr.ok()) co_return wr.error();
    co_await p->close(*fd);
    auto rn = co_await p->rename(tmp, final_name);
    if (!rn.ok()) co_return rn.error();
    w_->metrics.add("atomic_ops");
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> Engine::workload_recovery_probe(LibFs* p,
                                                      uint64_t index) {
  uint64_t dataset = sc_.workload.get_size("dataset", 1u << 20);
  uint64_t tail = sc_.workload.get_size("tail", 256u << 10);
  std::string dir = cfg_.chains[index % cfg_.chains.size()].root;
  std::string path = dir + "/" + p->name() + ".db";

  auto fd = co_await p->open(path, fs::O_WR | fs::O_CREAT_, 0644);
  if (!fd.ok()) co_return fd.error();
  constexpr uint64_t kIo = 4096;
  for (uint64_t off = 0; off < dataset; off += kIo) {
    auto wr = co_await p->pwrite(*fd, off, pattern_bytes(kIo, off / kIo));
    if (!wr.ok()) co_return wr.error();
  }
  auto s1 = co_await p->fsync(*fd);
  if (!s1.ok()) co_return s1.error();
  // The dataset is digested everywhere; only the tail below stays in the
  // update log and its mirrors.
  auto ev = co_await p->evict_private_cache();
  if (!ev.ok()) co_return ev.error();

  for (uint64_t off = 0; off < tail; off += kIo) {
    auto wr = co_await p->pwrite(*fd, dataset + off,
                                 pattern_bytes(kIo, 999000 + off / kIo));
    if (!wr.ok()) co_return wr.error();
  }
  auto s2 = co_await p->fsync(*fd);
  if (!s2.ok()) co_return s2.error();
  synced_[{p->name(), p->incarnation()}] = {p->update_log().replicated_seq(),
                                            w_->loop.now()};
  co_return Unit{};
}

// --- contend workload (linearizability histories) --------------------------------

Engine::ContendPlan Engine::make_contend_plan() {
  ContendPlan plan;
  uint64_t ops = sc_.workload.get_u64("ops_per_proc", 4);
  std::string dir = cfg_.chains.front().root;
  std::vector<std::string> files{dir + "/shared-a", dir + "/shared-b"};
  sim::Rng rng(sc_.seed * 31337 + 7);

  plan.per_proc.resize(sc_.processes);
  for (uint64_t pi = 0; pi < sc_.processes; pi++) {
    for (uint64_t i = 0; i < ops; i++) {
      HistoryOp op;
      uint64_t pick = rng.below(100);
      const std::string& f = files[rng.below(files.size())];
      if (pick < 40) {
        op.op = HOp::Write;
        op.path = f;
        op.off = rng.below(3) * 64;
        op.data = pattern_bytes(64, pi * 100 + i);
      } else if (pick < 70) {
        op.op = HOp::Read;
        op.path = f;
        op.off = rng.below(3) * 64;
        op.len = 64;
      } else if (pick < 80) {
        op.op = HOp::Stat;
        op.path = f;
      } else if (pick < 90) {
        op.op = HOp::Rename;
        op.path = files[0];
        op.path2 = files[1];
      } else {
        op.op = HOp::Readdir;
        op.path = dir;
      }
      plan.per_proc[pi].push_back(op);
    }
  }
  return plan;
}

sim::Co<Result<Unit>> Engine::exec_recorded(LibFs* p, HistoryOp plan) {
  auto* rec = history_.begin_op(p->name(), plan.op, w_->loop.now());
  uint64_t id = rec->id;
  rec->path = plan.path;
  rec->path2 = plan.path2;
  rec->off = plan.off;
  rec->len = plan.len;
  rec->flags = plan.flags;
  rec->mode = plan.mode;
  rec->data = plan.data;

  Err err = Err::Ok;
  uint64_t r_count = 0, r_hash = 0, r_size = 0;
  switch (plan.op) {
    case HOp::Write: {
      auto fd = co_await p->open(plan.path, fs::O_WR | fs::O_CREAT_, 0644);
      if (!fd.ok()) {
        err = fd.error();
        break;
      }
      auto wr = co_await p->pwrite(*fd, plan.off, plan.data);
      if (!wr.ok()) err = wr.error();
      else r_count = *wr;
      co_await p->close(*fd);
      break;
    }
    case HOp::Read: {
      auto fd = co_await p->open(plan.path, fs::O_RD);
      if (!fd.ok()) {
        err = fd.error();
        break;
      }
      auto r = co_await p->pread(*fd, plan.off, plan.len);
      if (!r.ok()) {
        err = r.error();
      } else {
        r_hash = Hasher{}.bytes(r->data).digest();
      }
      co_await p->close(*fd);
      break;
    }
    case HOp::Stat: {
      auto st = co_await p->stat(plan.path);
      if (!st.ok()) err = st.error();
      else r_size = st->size;
      break;
    }
    case HOp::Rename: {
      auto r = co_await p->rename(plan.path, plan.path2);
      if (!r.ok()) err = r.error();
      break;
    }
    case HOp::Unlink: {
      auto r = co_await p->unlink(plan.path);
      if (!r.ok()) err = r.error();
      break;
    }
    case HOp::Mkdir: {
      auto r = co_await p->mkdir(plan.path, plan.mode);
      if (!r.ok()) err = r.error();
      break;
    }
    case HOp::Readdir: {
      auto r = co_await p->readdir(plan.path);
      if (!r.ok()) err = r.error();
      else r_hash = names_hash(*r);
      break;
    }
    case HOp::Open: {
      auto fd = co_await p->open(plan.path, plan.flags, plan.mode);
      if (!fd.ok()) err = fd.error();
      else co_await p->close(*fd);
      break;
    }
    default:
      break;
  }
  HistoryOp& done = history_.ops[id];
  done.response = w_->loop.now();
  done.completed = true;
  done.err = err;
  done.r_count = r_count;
  done.r_hash = r_hash;
  done.r_size = r_size;
  co_return Unit{};
}

sim::Co<Result<Unit>> Engine::run_contend(bool* done) {
  ContendPlan plan = make_contend_plan();
  std::vector<uint32_t> schedule = sc_.schedule;
  if (schedule.empty()) {
    for (size_t i = 0; i < plan.per_proc[0].size(); i++) {
      for (uint32_t pi = 0; pi < sc_.processes; pi++) schedule.push_back(pi);
    }
  }

  // Start order follows the schedule; an op starts once its process's
  // previous op finished, letting later tokens overlap blocked ones.
  std::vector<size_t> next_op(sc_.processes, 0);
  std::vector<sim::Future<Unit>> ready;
  for (uint64_t i = 0; i < sc_.processes; i++) {
    ready.emplace_back();
    ready.back().fulfill(Unit{});
  }
  uint64_t outstanding = 0;
  sim::Future<Unit> all_done;

  for (uint32_t token : schedule) {
    CFS_ASSERT(token < sc_.processes);
    if (next_op[token] >= plan.per_proc[token].size()) continue;
    sim::Future<Unit> prev = ready[token];
    co_await prev;
    HistoryOp op = plan.per_proc[token][next_op[token]++];
    sim::Future<Unit> this_done;
    ready[token] = this_done;
    outstanding++;
    LibFs* p = w_->libfs("p" + std::to_string(token));
    [](Engine* eng, LibFs* p, HistoryOp op, sim::Future<Unit> signal,
       uint64_t* outstanding, sim::Future<Unit> all) -> sim::Task {
      co_await eng->exec_recorded(p, op);
      signal.try_fulfill(Unit{});
      if (--*outstanding == 0) all.try_fulfill(Unit{});
    }(this, p, std::move(op), this_done, &outstanding, all_done);
  }
  if (outstanding > 0) co_await all_done;
  *done = true;
  co_return Unit{};
}

// --- checkers --------------------------------------------------------------------

fs::FsImage Engine::replay_all() const {
  fs::FsImage img;
  img.nodes.clear();
  fs::FsImage::Node root;
  root.kind = fs::FileKind::Dir;
  root.attrs.mode = 0755;
  img.nodes[fs::kRootInode] = root;
  for (const auto& c : cfg_.chains) {
    img.add_dir(fs::kRootInode, cfg_.subtree_root_ino(c.subtree_id),
                fs::base_name(c.root), c.subtree_id);
  }
  for (const auto& rec : appends_) img.apply(rec.entry);
  return img;
}

CheckResult Engine::check_linearizable() {
  CheckResult out{"linearizability", false, ""};
  std::vector<HistoryOp> completed;
  for (const auto& op : history_.ops) {
    if (op.completed) completed.push_back(op);
  }
  std::vector<std::string> roots;
  for (const auto& c : cfg_.chains) roots.push_back(c.root);
  std::map<std::string, fs::Cred> creds;
  for (uint64_t i = 0; i < sc_.processes; i++) {
    creds["p" + std::to_string(i)] = fs::Cred{1, 1};
  }
  LinChecker checker(roots);
  auto r = checker.check(completed, creds);
  if (r.bound_exceeded) {
    out.detail = "search-bound-exceeded";
    return out;
  }
  out.pass = r.linearizable;
  if (!r.linearizable && !r.witness.empty()) {
    std::ostringstream d;
    d << "witness:";
    for (const auto& op : r.witness) {
      d << " " << op.proc << ":" << hop_name(op.op);
    }
    out.detail = d.str();
  }
  out.detail += " states=" + std::to_string(r.states_explored);
  return out;
}

CheckResult Engine::check_prefix() {
  CheckResult out{"prefix-crash-consistency", true, ""};
  for (const auto& c : cfg_.chains) {
    const auto& st = w_->cluster().chain(c.subtree_id);
    if (st.active.empty()) continue;
    auto* k = w_->kernfs_on(st.active.front());
    if (!k) continue;
    uint64_t recovered = k->area().state_hash_subtree(c.subtree_id);

    // Per-log surviving prefix, read from the authoritative replica.
    fs::FsImage img;
    img.nodes.clear();
    fs::FsImage::Node root;
    root.kind = fs::FileKind::Dir;
    root.attrs.mode = 0755;
    img.nodes[fs::kRootInode] = root;
    for (const auto& cc : cfg_.chains) {
      img.add_dir(fs::kRootInode, cfg_.subtree_root_ino(cc.subtree_id),
                  fs::base_name(cc.root), cc.subtree_id);
    }
    std::map<std::pair<std::string, uint64_t>, uint64_t> cut;
    for (const auto& rec : appends_) {
      auto key = std::make_pair(rec.proc, rec.inc);
      if (cut.count(key)) continue;
      fs::LibFs* inst =
          w_->instance_by_owner(rec.proc + "." + std::to_string(rec.inc));
      if (!inst) {
        cut[key] = 0;
        continue;
      }
      if (inst->node() == k->node()) {
        if (inst->dead()) {
          auto scan = log::UpdateLog::scan_region(w_->media, inst->log_region());
          cut[key] = scan.ok() ? scan->tail_seq : 0;
        } else {
          cut[key] = ~uint64_t{0};
        }
      } else {
        cut[key] = k->mirror_digested(inst->owner_string(), c.subtree_id);
        if (!inst->dead() && w_->node_alive(inst->node())) {
          cut[key] = ~uint64_t{0};
        }
      }
    }
    for (const auto& rec : appends_) {
      if (rec.entry.subtree != c.subtree_id) continue;
      auto key = std::make_pair(rec.proc, rec.inc);
      if (rec.entry.seq <= cut[key]) img.apply(rec.entry);
    }
    uint64_t expected = img.state_hash_subtree(c.subtree_id);
    if (expected != recovered) {
      out.pass = false;
      out.detail += " chain=" + c.root + " state-mismatch";
    }
    // Guarantee floor: for every dead instance, the surviving prefix must
    // reach at least the mode-appropriate guarantee.
    std::map<std::pair<std::string, uint64_t>, uint64_t> appended_hwm;
    std::set<std::pair<std::string, uint64_t>> touched_chain;
    for (const auto& rec : appends_) {
      auto& hwm = appended_hwm[{rec.proc, rec.inc}];
      hwm = std::max(hwm, rec.entry.seq);
      if (rec.entry.subtree == c.subtree_id) {
        touched_chain.insert({rec.proc, rec.inc});
      }
    }
    for (const auto& [key, k_cut] : cut) {
      if (!touched_chain.count(key)) continue;
      fs::LibFs* inst = w_->instance_by_owner(key.first + "." +
                                              std::to_string(key.second));
      if (!inst || !inst->dead()) continue;
      uint64_t synced_seq = 0;
      if (auto sit = synced_.find(key); sit != synced_.end()) {
        synced_seq = sit->second.first;
      }
      bool node_crashed = crash_time_.count(inst->node()) != 0;
      uint64_t floor = repl::guaranteed_prefix(
          sc_.mode, synced_seq, /*node_survived=*/!node_crashed,
          appended_hwm[key]);
      if (k_cut < floor) {
        out.pass = false;
        out.detail += " lost-guaranteed:" + key.first;
      }
    }
  }
  return out;
}

CheckResult Engine::check_convergence() {
  CheckResult out{"replica-convergence", true, ""};
  for (const auto& c : cfg_.chains) {
    const auto& st = w_->cluster().chain(c.subtree_id);
    std::vector<kernfs::KernFs*> replicas;
    for (const auto& node : st.active) {
      if (w_->node_alive(node)) replicas.push_back(w_->kernfs_on(node));
    }
    if (!c.reserve.empty() && !st.reserve_promoted &&
        w_->node_alive(c.reserve) &&
        w_->cluster().status(c.reserve) == cluster::NodeStatus::Alive) {
      replicas.push_back(w_->kernfs_on(c.reserve));
    }
    if (replicas.size() < 2) continue;
    bool any_pending = false;
    for (auto* k : replicas) {
      if (!k->area().pending_invalidations().empty()) any_pending = true;
    }
    if (!any_pending) {
      uint64_t first = replicas[0]->area().state_hash_subtree(c.subtree_id);
      for (size_t i = 1; i < replicas.size(); i++) {
        if (replicas[i]->area().state_hash_subtree(c.subtree_id) != first) {
          out.pass = false;
          out.detail += " chain=" + c.root + " hash-divergence@" +
                        replicas[i]->id();
        }
      }
    } else {
      // Pairwise comparison over content both sides still consider valid.
      auto img0 = replicas[0]->area().logical_image();
      for (size_t i = 1; i < replicas.size(); i++) {
        auto img = replicas[i]->area().logical_image();
        for (const auto& [ino, n] : img.nodes) {
          if (replicas[i]->area().pending_invalidation(ino)) continue;
          if (replicas[0]->area().pending_invalidation(ino)) continue;
          auto it = img0.nodes.find(ino);
          if (it == img0.nodes.end()) continue;
          if (n.kind == fs::FileKind::File && it->second.data != n.data) {
            out.pass = false;
            out.detail += " stale-content ino=" + std::to_string(ino);
          }
        }
      }
    }
  }
  return out;
}

CheckResult Engine::check_lease_safety() const {
  CheckResult out{"lease-safety", lease_violations_ == 0,
                  "violations=" + std::to_string(lease_violations_)};
  return out;
}

CheckResult Engine::check_epochs() const {
  CheckResult out{"epoch-notification", true, ""};
  for (const auto& kid : w_->all_kernfs_ids()) {
    auto* k = const_cast<world::World&>(*w_).kernfs_by_id(kid);
    if (!k || !w_->node_alive(k->node())) continue;
    if (k->epoch() != w_->cluster().epoch() &&
        w_->cluster().epoch() > 1) {
      out.pass = false;
      out.detail += " lagging:" + kid;
    }
  }
  return out;
}

CheckResult Engine::check_metrics_conservation() const {
  uint64_t sent = w_->net.bytes_for_tag("SEGMENT_WRITE");
  uint64_t acked = w_->metrics.get("acked_durable_bytes");
  CheckResult out{"metrics-conservation", sent >= acked,
                  "replicated=" + std::to_string(sent) +
                      " acked=" + std::to_string(acked)};
  return out;
}

CheckResult Engine::check_rejoin(const std::string& node) {
  CheckResult out{"rejoin-soundness", true, ""};
  auto it = rejoin_invalidated_.find(node);
  if (it == rejoin_invalidated_.end()) {
    out.pass = false;
    out.detail = "no rejoin recorded";
    return out;
  }
  std::set<fs::InodeNum> invalidated(it->second.begin(), it->second.end());
  for (fs::InodeNum ino : downtime_writes_[node]) {
    if (!invalidated.count(ino)) {
      out.pass = false;
      out.detail += " missed ino=" + std::to_string(ino);
    }
  }
  out.detail += " invalidated=" + std::to_string(invalidated.size()) +
                " written=" + std::to_string(downtime_writes_[node].size());
  return out;
}

CheckReport Engine::check() {
  CheckReport report;
  auto st = run();
  if (!st.ok()) {
    report.results.push_back(
        CheckResult{"scenario", false, std::string(err_name(st.error()))});
    return report;
  }
  bool crash_scenario = false, recover_scenario = false;
  std::string recovered_node;
  for (const auto& f : sc_.faults) {
    if (f.kind == FaultSpec::Kind::CrashNode) crash_scenario = true;
    if (f.kind == FaultSpec::Kind::RecoverNode) {
      recover_scenario = true;
      recovered_node = f.node;
    }
  }
  report.results.push_back(CheckResult{
      "workload", !workload_failed_ || crash_scenario, workload_error_});
  if (sc_.kind == "contend") {
    report.results.push_back(check_linearizable());
  }
  if (crash_scenario) report.results.push_back(check_prefix());
  report.results.push_back(check_convergence());
  report.results.push_back(check_lease_safety());
  report.results.push_back(check_epochs());
  report.results.push_back(check_metrics_conservation());
  if (recover_scenario) report.results.push_back(check_rejoin(recovered_node));
  return report;
}

std::string Engine::summary_json(const CheckReport* report) const {
  std::ostringstream out;
  out << "{\n  \"seed\": " << sc_.seed << ",\n  \"workload\": \"" << sc_.kind
      << "\",\n  \"trace_hash\": \"" << std::hex << trace_hash() << std::dec
      << "\",\n  \"sim_time_ns\": " << w_->loop.now()
      << ",\n  \"messages\": " << w_->net.messages_delivered()
      << ",\n  \"ops\": " << history_.ops.size();
  if (report) {
    out << ",\n  \"checks\": {";
    bool first = true;
    for (const auto& r : report->results) {
      if (!first) out << ", ";
      out << "\"" << r.name << "\": " << (r.pass ? "true" : "false");
      first = false;
    }
    out << "}";
  }
  out << "\n}\n";
  return out.str();
}

}  // namespace cfs::harness
