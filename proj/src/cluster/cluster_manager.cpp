/*
 * cluster_manager.cpp
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

#include "cluster/cluster_manager.hpp"

#include <algorithm>

#include "fs/libfs.hpp"
#include "kernfs/kernfs.hpp"

namespace cfs::cluster {

ClusterManager::ClusterManager(world::World& w) : w_(w) {
  for (const auto& n : w_.cfg.nodes) status_[n.id] = NodeStatus::Alive;
  for (const auto& c : w_.cfg.chains) {
    ChainState st;
    st.cfg = &w_.cfg.chains[c.subtree_id - 1];
    st.active = c.replicas;
    chains_[c.subtree_id] = st;
  }
}

void ClusterManager::start() {
  w_.net.add_endpoint(kEndpoint, "cluster-host");
  w_.net.set_rpc_handler(
      kEndpoint, [this](const std::string& src, const std::string& tag,
                        const Bytes& req) {
        return dispatch(src, tag, req).fut;
      });
  // Pinned management (single-manager emulation) claims every subtree up
  // front and never migrates.
  if (!w_.cfg.pinned_manager.empty()) {
    for (const auto& c : w_.cfg.chains) {
      assignments_[c.subtree_id] = Assignment{w_.cfg.pinned_manager,
                                              ~uint64_t{0}};
      if (auto* k = w_.kernfs_by_id(w_.cfg.pinned_manager)) {
        k->install_managed(c.subtree_id);
      }
    }
  }
  heartbeat_tick();
}

NodeStatus ClusterManager::status(const std::string& node) const {
  auto it = status_.find(node);
  return it == status_.end() ? NodeStatus::Failed : it->second;
}

std::vector<std::string> ClusterManager::replica_kernfs(
    uint32_t subtree_id) const {
  std::vector<std::string> out;
  auto it = chains_.find(subtree_id);
  if (it == chains_.end()) return out;
  for (const auto& node : it->second.active) out.push_back(node + "/k0");
  return out;
}

std::string ClusterManager::reserve_kernfs(uint32_t subtree_id) const {
  auto it = chains_.find(subtree_id);
  if (it == chains_.end()) return "";
  const ChainState& st = it->second;
  if (st.cfg->reserve.empty() || st.reserve_promoted) return "";
  if (status(st.cfg->reserve) != NodeStatus::Alive) return "";
  return st.cfg->reserve + "/k0";
}

std::string ClusterManager::manager_of(uint32_t subtree_id) const {
  auto it = assignments_.find(subtree_id);
  return it == assignments_.end() ? "" : it->second.kernfs;
}

sim::AsyncMutex& ClusterManager::assign_lock(uint32_t id) {
  auto it = assign_mutex_.find(id);
  if (it == assign_mutex_.end()) {
    it = assign_mutex_.emplace(id, std::make_unique<sim::AsyncMutex>()).first;
  }
  return *it->second;
}

uint64_t ClusterManager::stat_count(uint32_t subtree,
                                    const std::string& kernfs_ep) const {
  auto it = stats_.find({subtree, kernfs_ep});
  return it == stats_.end() ? 0 : it->second;
}

// --- dispatch -------------------------------------------------------------------

sim::Co<Result<Bytes>> ClusterManager::dispatch(std::string src,
                                                std::string tag, Bytes req) {
  (void)src;
  if (tag == "WHO_MANAGES") {
    auto m = proto::WhoManagesReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await who_manages(*m);
  }
  co_return Err::EINVAL_;
}

sim::Co<Result<Bytes>> ClusterManager::who_manages(proto::WhoManagesReq req) {
  auto guard = co_await assign_lock(req.subtree_id).lock();
  auto it = assignments_.find(req.subtree_id);

  if (it == assignments_.end()) {
    // Unmanaged: assign the requesting kernfs.
    assignments_[req.subtree_id] =
        Assignment{req.requester, w_.loop.now() + w_.cfg.mgr_migration_ns};
    proto::WhoManagesRep rep;
    rep.manager = req.requester;
    rep.expiry = assignments_[req.subtree_id].expiry;
    co_return rep.encode();
  }

  Assignment& a = it->second;
  if (w_.loop.now() >= a.expiry && w_.cfg.pinned_manager.empty()) {
    // Management expired: move it to the kernfs whose libfses asked most.
    std::string top = a.kernfs;
    uint64_t top_count = stat_count(req.subtree_id, a.kernfs);
    for (const auto& [key, count] : stats_) {
      if (key.first != req.subtree_id) continue;
      if (count > top_count) {
        top = key.second;
        top_count = count;
      }
    }
    // A dead manager must hand over regardless of stats.
    kernfs::KernFs* cur = w_.kernfs_by_id(a.kernfs);
    bool cur_dead = !cur || !w_.node_alive(cur->node());
    if (cur_dead && top == a.kernfs) top = req.requester;
    if (top != a.kernfs) {
      auto moved = co_await migrate_management(req.subtree_id, a.kernfs, top);
      if (moved.ok()) {
        a.kernfs = top;
      }
    }
    a.expiry = w_.loop.now() + w_.cfg.mgr_migration_ns;
    for (auto sit = stats_.begin(); sit != stats_.end();) {
      sit = sit->first.first == req.subtree_id ? stats_.erase(sit)
                                               : std::next(sit);
    }
  }
  proto::WhoManagesRep rep;
  rep.manager = a.kernfs;
  rep.expiry = a.expiry;
  co_return rep.encode();
}

sim::Co<Result<Unit>> ClusterManager::migrate_management(uint32_t subtree_id,
                                                         const std::string& from,
                                                         const std::string& to) {
  kernfs::KernFs* from_k = w_.kernfs_by_id(from);
  bool from_alive = from_k && w_.node_alive(from_k->node());
  proto::MigrateTable table;
  table.subtree_id = subtree_id;
  table.from = from;
  if (from_alive) {
    Bytes out;
    ByteWriter w(out);
    w.u32(subtree_id);
    w.str(to);
    auto rep = co_await w_.net.rpc(kEndpoint, from, "MIGRATE_OUT", out);
    if (!rep.ok()) co_return rep.error();
    auto parsed = proto::MigrateTable::decode(*rep);
    if (!parsed.ok()) co_return parsed.error();
    table = *parsed;
  }
  auto installed = co_await w_.net.rpc(kEndpoint, to, "MIGRATE",
                                       table.encode());
  if (!installed.ok()) co_return installed.error();
  w_.metrics.add("manager_migrations");
  co_return Unit{};
}

// --- failure detection ------------------------------------------------------------

void ClusterManager::heartbeat_tick() {
  for (const auto& [node, st] : status_) {
    if (st != NodeStatus::Alive) continue;
    if (auto* k = w_.kernfs_on(node)) probe(node, k->id());
  }
  w_.loop.schedule_in(w_.cfg.heartbeat_interval_ns, [this] { heartbeat_tick(); },
                      /*periodic=*/true);
}

sim::Task ClusterManager::probe(std::string node, std::string kernfs_ep) {
  sim::Time sent = w_.loop.now();
  auto rep = w_.net.rpc(kEndpoint, kernfs_ep, "HEARTBEAT", Bytes{});
  sim::Future<Unit> timeout;
  w_.loop.schedule_in(w_.cfg.heartbeat_timeout_ns,
                      [timeout] { timeout.try_fulfill(Unit{}); });
  // Race the reply against the heartbeat timeout.
  sim::Future<Unit> first;
  rep.on_ready([first](const Result<Bytes>&) { first.try_fulfill(Unit{}); });
  timeout.on_ready([first](const Unit&) { first.try_fulfill(Unit{}); });
  co_await first;
  (void)sent;
  if (rep.ready() && rep.peek().ok()) {
    // Fold acquire stats into the migration ledger.
    ByteReader r(rep.peek().value());
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n && r.ok(); i++) {
      uint32_t subtree = r.u32();
      std::string requester = r.str();
      uint64_t count = r.u64();
      stats_[{subtree, requester}] += count;
    }
    co_return;
  }
  if (status(node) == NodeStatus::Alive && !w_.net.node_alive(node)) {
    fail_node(node);
  }
}

sim::Task ClusterManager::fail_node(media::NodeId node) {
  if (status(node) != NodeStatus::Alive) co_return;
  status_[node] = NodeStatus::Failed;
  failed_at_[node] = w_.loop.now();
  detected_at_[node] = w_.loop.now();
  crash_epoch_[node] = epoch_;
  epoch_++;
  w_.metrics.add("failures_detected");
  if (w_.failure_hook) w_.failure_hook(node, epoch_);
  co_await broadcast_epoch(true, node);
  run_failover(node);
}

sim::Co<Result<Unit>> ClusterManager::broadcast_epoch(bool failed,
                                                      media::NodeId node) {
  proto::EpochNotify msg;
  msg.epoch = epoch_;
  msg.node = node;
  msg.failed = failed;
  std::vector<sim::Future<Result<Bytes>>> acks;
  for (const auto& [n, st] : status_) {
    if (st != NodeStatus::Alive || n == node) continue;
    for (const auto& kid : w_.all_kernfs_ids()) {
      auto* k = w_.kernfs_by_id(kid);
      if (k && k->node() == n) {
        acks.push_back(w_.net.rpc(kEndpoint, kid, "EPOCH", msg.encode()));
      }
    }
  }
  for (size_t i = 0; i < acks.size(); i++) {
    sim::Future<Result<Bytes>> f = acks[i];
    co_await f;
  }
  co_return Unit{};
}

sim::Task ClusterManager::run_failover(media::NodeId node) {
  // Reconfigure every chain the node participated in.
  for (auto& [subtree_id, st] : chains_) {
    auto it = std::find(st.active.begin(), st.active.end(), node);
    bool touched = false;
    if (it != st.active.end()) {
      st.active.erase(it);
      touched = true;
    }
    if (st.active.empty()) {
      if (!st.cfg->reserve.empty() &&
          status(st.cfg->reserve) == NodeStatus::Alive &&
          !st.reserve_promoted) {
        // Cascade: the reserve replica becomes a cache replica.
        st.reserve_promoted = true;
        st.active.push_back(st.cfg->reserve);
        Bytes b;
        ByteWriter w(b);
        w.u32(subtree_id);
        co_await w_.net.rpc(kEndpoint, st.cfg->reserve + "/k0", "PROMOTE", b);
        w_.metrics.add("reserve_promotions");
      } else if (st.active.empty()) {
        st.unavailable = true;
        w_.metrics.add("chains_unavailable");
      }
    }
    (void)touched;
  }
  // Reassign lease management owned by the failed node's kernfses: the
  // next replica of the managed subtree's chain replays the replicated
  // lease log and re-grants.
  for (auto& [subtree_id, a] : assignments_) {
    auto* mgr_k = w_.kernfs_by_id(a.kernfs);
    if (!mgr_k || mgr_k->node() != node) continue;
    const ChainState& st = chains_.at(subtree_id);
    if (st.active.empty()) continue;
    std::string next = st.active.front() + "/k0";
    Bytes b;
    ByteWriter w(b);
    w.u32(subtree_id);
    w.str(a.kernfs);
    auto rep = co_await w_.net.rpc(kEndpoint, next, "MGR_TAKEOVER", b);
    if (rep.ok()) {
      a.kernfs = next;
      a.expiry = w_.loop.now() + w_.cfg.mgr_migration_ns;
      w_.metrics.add("manager_takeovers");
    }
  }
  if (failover_hook) failover_hook(node);
}

void ClusterManager::note_process_death(const std::string& proc) {
  fs::LibFs* lf = w_.libfs(proc);
  if (!lf) return;
  if (auto* k = w_.kernfs_on(lf->node())) {
    k->unregister_local_libfs(lf);
    k->recover_dead_libfs(lf);
  }
}

// --- rejoin ---------------------------------------------------------------------

sim::Co<Result<Unit>> ClusterManager::rejoin(media::NodeId node) {
  if (status(node) != NodeStatus::Failed) co_return Err::EINVAL_;
  status_[node] = NodeStatus::Recovering;

  // Every lease granted to the node must have expired before it rejoins.
  sim::Time horizon =
      failed_at_[node] + w_.cfg.lease_term_ns + w_.cfg.lease_grace_ns;
  if (w_.loop.now() < horizon) co_await sim::sleep_until(w_.loop, horizon);

  // Re-enter chains first (tail-most returning member): replication now
  // includes this node, so every digest from here on reaches it directly.
  // Demote a promoted reserve once a configured cache replica is back.
  for (auto& [subtree_id, st] : chains_) {
    bool configured_member = w_.cfg.node_in_chain(node, *st.cfg);
    if (configured_member) {
      if (st.reserve_promoted) {
        st.reserve_promoted = false;
        auto rit = std::find(st.active.begin(), st.active.end(),
                             st.cfg->reserve);
        if (rit != st.active.end()) st.active.erase(rit);
        Bytes b;
        ByteWriter w(b);
        w.u32(subtree_id);
        co_await w_.net.rpc(kEndpoint, st.cfg->reserve + "/k0", "DEMOTE", b);
      }
      if (std::find(st.active.begin(), st.active.end(), node) ==
          st.active.end()) {
        st.active.push_back(node);
      }
      st.unavailable = false;
    }
  }

  // Missed-epoch bitmaps and fresh metadata, unioned across the head of
  // every chain this node replicates (each head drains its in-flight
  // digests before answering).
  kernfs::KernFs* local = w_.kernfs_on(node);
  std::vector<fs::InodeNum> invalidated;
  if (local) {
    kernfs::KernFs::RejoinData data;
    std::set<std::string> peers;
    for (const auto& [subtree_id, st] : chains_) {
      if (!w_.cfg.node_in_chain(node, *st.cfg)) continue;
      for (const auto& n : st.active) {
        if (n != node && status(n) == NodeStatus::Alive) {
          peers.insert(n + "/k0");
          break;  // the head answers for this chain
        }
      }
    }
    proto::RejoinFetchReq req;
    req.from_epoch = crash_epoch_[node];
    for (const auto& peer : peers) {
      auto rep = co_await w_.net.rpc(kEndpoint, peer, "REJOIN_FETCH",
                                     req.encode(), 5 * sim::kSec);
      if (!rep.ok()) continue;
      ByteReader r(*rep);
      uint32_t blen = r.u32();
      Bytes bmbytes = r.raw(blen);
      if (auto bm = kernfs::SharedArea::parse_bitmaps(bmbytes); bm.ok()) {
        for (auto& [epoch, inos] : *bm) {
          data.bitmaps[epoch].insert(inos.begin(), inos.end());
        }
      }
      uint32_t n = r.u32();
      for (uint32_t i = 0; i < n && r.ok(); i++) {
        fs::InodeNum ino = r.u64();
        bool exists = r.u8();
        kernfs::SharedArea::NodeMeta meta;
        if (exists) {
          uint32_t mlen = r.u32();
          Bytes mb = r.raw(mlen);
          if (auto parsed = kernfs::SharedArea::parse_meta(mb); parsed.ok()) {
            meta = *parsed;
          }
        }
        data.metas[ino] = {exists, meta};
      }
    }
    invalidated = local->rejoin_invalidate(data);
  }

  status_[node] = NodeStatus::Alive;
  epoch_++;  // recovery event
  w_.metrics.add("rejoins");
  co_await broadcast_epoch(false, node);
  cleanup_epoch_bitmaps();
  if (w_.rejoin_hook) w_.rejoin_hook(node, invalidated);
  co_return Unit{};
}

void ClusterManager::cleanup_epoch_bitmaps() {
  // An epoch's bitmaps can go once no node that crashed at or before it is
  // still down.
  uint64_t oldest_pending = epoch_;
  for (const auto& [node, st] : status_) {
    if (st != NodeStatus::Alive) {
      auto it = crash_epoch_.find(node);
      if (it != crash_epoch_.end()) {
        oldest_pending = std::min(oldest_pending, it->second);
      }
    }
  }
  for (uint64_t e = 1; e < oldest_pending; e++) {
    Bytes b;
    ByteWriter w(b);
    w.u64(e);
    for (const auto& kid : w_.all_kernfs_ids()) {
      auto* k = w_.kernfs_by_id(kid);
      if (k && w_.node_alive(k->node())) {
        w_.net.rpc(kEndpoint, kid, "EPOCH_CLEAN", b);
      }
    }
  }
}

}  // namespace cfs::cluster
