/*
 * kernfs.hpp
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
#include <set>
#include <string>

#include "coherence/lease.hpp"
#include "kernfs/shared_area.hpp"
#include "log/update_log.hpp"
#include "proto/wire.hpp"
#include "world/world.hpp"

namespace cfs::kernfs {

// Per-node (per-socket) daemon: shared cache areas and digestion, lease
// management for the subtrees it was assigned, mirrored update logs for
// chain replication, and the recovery/rejoin protocol.
class KernFs {
 public:
  KernFs(world::World& w, const media::NodeId& node, uint32_t socket);

  const std::string& id() const { return id_; }
  const media::NodeId& node() const { return node_; }
  SharedArea& area() { return *area_; }
  uint64_t epoch() const { return epoch_; }
  void set_epoch(uint64_t e) { epoch_ = std::max(epoch_, e); }
  uint64_t incarnation() const { return incarnation_; }
  void bump_incarnation() { incarnation_++; }

  // Lease manager introspection (safety auditor).
  const coherence::LeaseTable& lease_table() const { return table_; }
  const std::set<uint32_t>& managed_subtrees() const { return managed_; }

  // Registered local libfs instances get extent-mapping invalidations.
  void register_local_libfs(fs::LibFs* l) { local_libfs_.insert(l); }
  void unregister_local_libfs(fs::LibFs* l) { local_libfs_.erase(l); }

  // Same-node mapping analog: direct extent snapshot for local reads.
  struct ExtentSnapshot {
    uint64_t begin, end;
    PlaceTier tier;
    media::RegionId region;
    uint64_t region_off;
  };
  Result<std::vector<ExtentSnapshot>> snapshot_extents(fs::InodeNum ino,
                                                       const fs::Cred& cred);

  // Crash/recovery lifecycle (driven by World).
  void on_node_crash();
  // Local restart work: remount the shared area and lease log. Dead local
  // update logs are evicted (digested) only when the node was never failed
  // over: once a chain adopted the survivor's prefix, the dead logs' tails
  // beyond it are gone by prefix semantics and must not resurface.
  sim::Future<Result<Unit>> local_recover(bool digest_dead_logs);

  // Rejoin invalidation given missed-epoch bitmaps and fresh metadata.
  struct RejoinData {
    std::map<uint64_t, std::set<fs::InodeNum>> bitmaps;
    std::map<fs::InodeNum, std::pair<bool, SharedArea::NodeMeta>> metas;
  };
  std::vector<fs::InodeNum> rejoin_invalidate(const RejoinData& data);

  // Management bookkeeping used by the cluster manager orchestration.
  void install_managed(uint32_t subtree_id) { managed_.insert(subtree_id); }
  void drop_managed(uint32_t subtree_id) { managed_.erase(subtree_id); }
  bool manages(uint32_t subtree_id) const { return managed_.count(subtree_id); }

  // Role changes for reserve promotion / demotion.
  void set_chain_role(uint32_t subtree_id, Role role);

  // Expose the lease-log mirror region that a peer manager writes into.
  media::RegionId mirror_of_peer_llog(const std::string& peer);

  // Kicks the periodic LRU migration check.
  void maybe_migrate();

  // Registers a dead local process's log for recovery digestion.
  void note_local_log(const std::string& owner, media::RegionId region);

  // Process-failure path: digest the dead instance's update log (locally
  // and on chain peers) and release its leases.
  sim::Task recover_dead_libfs(fs::LibFs* dead);

 private:
  friend class KernFsTestPeek;

  sim::Co<Result<Bytes>> dispatch(std::string src, std::string tag, Bytes req);

  // Lease protocol.
  sim::Co<Result<Bytes>> handle_acquire(proto::AcquireReq req,
                                        const std::string& via);
  sim::Co<Result<Bytes>> manager_grant(proto::AcquireReq req);
  sim::Co<Result<Unit>> log_lease(const coherence::Lease& l,
                                  coherence::LeaseLogKind kind);
  sim::Co<Result<std::string>> resolve_manager(uint32_t subtree_id);
  sim::Co<Result<Bytes>> handle_release(proto::LeaseMsg msg);
  sim::Co<Result<Bytes>> handle_renew(proto::LeaseMsg msg);
  sim::Co<Result<Bytes>> handle_revoke_relay(proto::LeaseMsg msg);
  sim::Co<Result<Bytes>> handle_migrate_out(uint32_t subtree_id,
                                            std::string to);
  sim::Co<Result<Bytes>> handle_migrate_in(proto::MigrateTable table);
  sim::Co<Result<Bytes>> handle_takeover(uint32_t subtree_id,
                                         std::string failed_manager);

  // Replication / digestion.
  sim::Co<Result<Bytes>> handle_open_mirror(proto::OpenMirrorReq req,
                                            std::string src);
  sim::Co<Result<Bytes>> handle_chain_step(proto::ChainStep step);
  sim::Co<Result<Bytes>> handle_evict(proto::EvictReq req);
  sim::Task evict_failed_owner_mirrors(media::NodeId failed);
  sim::Co<Result<Bytes>> handle_local_digest(proto::LocalDigestReq req);
  Result<Unit> digest_entries(const std::vector<log::LogEntry>& entries,
                              const fs::Cred& writer, sim::Time* deadline);

  // Reads.
  sim::Co<Result<Bytes>> handle_read(proto::ReadReq req, bool remote);
  sim::Co<Result<Bytes>> handle_resolve(proto::ResolveReq req);

  // Cluster-driven.
  sim::Co<Result<Bytes>> handle_rejoin_fetch(proto::RejoinFetchReq req);

  struct Mirror {
    media::RegionId region = 0;
    std::string owner;
    uint32_t subtree_id = 0;
    // Log-space frontiers (frame covers): dedup and the prefix oracle.
    uint64_t received_seq = 0;
    uint64_t digested_seq = 0;
    // Mirror-space frontier: the ring has its own dense sequence numbers
    // (coalesced streams skip log seqs).
    uint64_t digested_mirror_seq = 0;
  };
  Mirror* mirror_for(const std::string& owner, uint32_t subtree_id);
  sim::Co<Result<uint64_t>> digest_mirror(Mirror& m, uint64_t through_seq,
                                          const fs::Cred& writer);

 public:
  // Digested frontier of a mirrored log (prefix checker support).
  uint64_t mirror_digested(const std::string& owner, uint32_t subtree) const {
    auto it = mirrors_.find({owner, subtree});
    return it == mirrors_.end() ? 0 : it->second.digested_seq;
  }

 private:

  world::World& w_;
  media::NodeId node_;
  uint32_t socket_;
  std::string id_;
  uint64_t incarnation_ = 0;
  uint64_t epoch_ = 1;  // matches the cluster manager's initial epoch

  std::unique_ptr<SharedArea> area_;
  std::unique_ptr<coherence::LeaseLog> llog_;
  // Mirrors of peer managers' lease logs, created on this node.
  std::map<std::string, media::RegionId> peer_llog_mirrors_;

  coherence::LeaseTable table_;
  std::set<uint32_t> managed_;
  std::map<uint32_t, std::pair<std::string, sim::Time>> mgr_hints_;
  std::map<uint32_t, std::unique_ptr<sim::AsyncMutex>> subtree_mutex_;
  uint64_t lease_counter_ = 0;
  uint64_t token_ = 0;

  std::map<std::pair<std::string, uint32_t>, Mirror> mirrors_;
  std::map<std::string, media::RegionId> local_logs_;  // dead-process logs
  std::map<std::pair<std::string, uint32_t>, uint64_t> resize_reserved_;

  // Acquire counts per (subtree, requesting kernfs) since last heartbeat.
  std::map<std::pair<uint32_t, std::string>, uint64_t> acquire_stats_;

  std::set<fs::LibFs*> local_libfs_;
  uint64_t active_digests_ = 0;

  sim::AsyncMutex& subtree_lock(uint32_t id);
};

}  // namespace cfs::kernfs
