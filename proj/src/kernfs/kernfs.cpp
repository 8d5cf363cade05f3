/*
 * kernfs.cpp
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

#include "kernfs/kernfs.hpp"

#include <algorithm>

#include "cluster/cluster_manager.hpp"
#include "fs/libfs.hpp"
#include "util/hash.hpp"

namespace cfs::kernfs {

using coherence::Lease;
using coherence::LeaseLog;
using coherence::LeaseLogKind;
using log::LogEntry;

KernFs::KernFs(world::World& w, const media::NodeId& node, uint32_t socket)
    : w_(w), node_(node), socket_(socket) {
  id_ = node + "/k" + std::to_string(socket);
  token_ = hash_str(id_) & 0xFFFFFFFFull;
  area_ = std::make_unique<SharedArea>(w_.loop, w_.media, node_, id_,
                                       w_.cfg.area);
  area_->set_invalidation_callback([this](fs::InodeNum ino) {
    for (fs::LibFs* lf : local_libfs_) {
      if (!lf->dead()) lf->invalidate_mapping(ino);
    }
  });
  media::RegionId llog_region = w_.media.create_region(
      node_, media::Tier::NVM, id_ + "/llog", w_.cfg.llog_capacity);
  llog_ = std::make_unique<LeaseLog>(w_.loop, w_.media, llog_region);
  w_.net.add_endpoint(id_, node_);
  w_.net.set_rpc_handler(
      id_, [this](const std::string& src, const std::string& tag,
                  const Bytes& req) {
        return dispatch(src, tag, req).fut;
      });
}

media::RegionId KernFs::mirror_of_peer_llog(const std::string& peer) {
  auto it = peer_llog_mirrors_.find(peer);
  if (it != peer_llog_mirrors_.end()) return it->second;
  std::string name = id_ + "/llog-mirror/" + peer;
  media::RegionId r = w_.media.find_region(node_, name);
  if (r == 0) {
    r = w_.media.create_region(node_, media::Tier::NVM, name,
                               w_.cfg.llog_capacity);
  }
  peer_llog_mirrors_[peer] = r;
  w_.net.register_region(id_, r, peer);
  return r;
}

sim::AsyncMutex& KernFs::subtree_lock(uint32_t id) {
  auto it = subtree_mutex_.find(id);
  if (it == subtree_mutex_.end()) {
    it = subtree_mutex_.emplace(id, std::make_unique<sim::AsyncMutex>()).first;
  }
  return *it->second;
}

KernFs::Mirror* KernFs::mirror_for(const std::string& owner,
                                   uint32_t subtree_id) {
  auto it = mirrors_.find({owner, subtree_id});
  return it == mirrors_.end() ? nullptr : &it->second;
}

void KernFs::note_local_log(const std::string& owner, media::RegionId region) {
  local_logs_[owner] = region;
}

void KernFs::set_chain_role(uint32_t subtree_id, Role role) {
  if (role == Role::CacheReplica) {
    area_->promote_subtree(subtree_id);
  } else {
    area_->demote_subtree(subtree_id);
  }
}

void KernFs::on_node_crash() {
  incarnation_++;
  table_ = coherence::LeaseTable{};
  managed_.clear();
  mgr_hints_.clear();
  mirrors_.clear();
  acquire_stats_.clear();
  resize_reserved_.clear();
  local_libfs_.clear();
  // subtree_mutex_ stays: suspended grants still hold guards into those
  // objects and unwind through their incarnation checks.
}

// --- dispatch ----------------------------------------------------------------

sim::Co<Result<Bytes>> KernFs::dispatch(std::string src, std::string tag,
                                        Bytes req) {
  if (!w_.node_alive(node_)) co_return Err::DstFailed;
  if (tag == "ACQUIRE" || tag == "FORWARD") {
    auto m = proto::AcquireReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_acquire(*m, src);
  }
  if (tag == "RELEASE") {
    auto m = proto::LeaseMsg::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_release(*m);
  }
  if (tag == "RENEW") {
    auto m = proto::LeaseMsg::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_renew(*m);
  }
  if (tag == "REVOKE") {
    auto m = proto::LeaseMsg::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_revoke_relay(*m);
  }
  if (tag == "MIGRATE_OUT") {
    ByteReader r(req);
    uint32_t subtree = r.u32();
    std::string to = r.str();
    if (!r.ok()) co_return Err::ParseError;
    co_return co_await handle_migrate_out(subtree, to);
  }
  if (tag == "MIGRATE") {
    auto m = proto::MigrateTable::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_migrate_in(*m);
  }
  if (tag == "MGR_TAKEOVER") {
    ByteReader r(req);
    uint32_t subtree = r.u32();
    std::string failed = r.str();
    if (!r.ok()) co_return Err::ParseError;
    co_return co_await handle_takeover(subtree, failed);
  }
  if (tag == "HEARTBEAT") {
    // Reply with acquire stats since the last beat (migration decisions).
    Bytes b;
    ByteWriter w(b);
    w.u32(static_cast<uint32_t>(acquire_stats_.size()));
    for (const auto& [key, count] : acquire_stats_) {
      w.u32(key.first);
      w.str(key.second);
      w.u64(count);
    }
    acquire_stats_.clear();
    co_return b;
  }
  if (tag == "EPOCH") {
    auto m = proto::EpochNotify::decode(req);
    if (!m.ok()) co_return m.error();
    set_epoch(m->epoch);
    if (m->failed) evict_failed_owner_mirrors(m->node);
    co_return Bytes{};
  }
  if (tag == "EPOCH_CLEAN") {
    ByteReader r(req);
    uint64_t e = r.u64();
    area_->drop_epoch(e);
    co_return Bytes{};
  }
  if (tag == "PROMOTE" || tag == "DEMOTE") {
    ByteReader r(req);
    uint32_t subtree = r.u32();
    set_chain_role(subtree, tag == "PROMOTE" ? Role::CacheReplica
                                             : Role::ReserveReplica);
    co_return Bytes{};
  }
  if (tag == "OPEN_MIRROR") {
    auto m = proto::OpenMirrorReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_open_mirror(*m, src);
  }
  if (tag == "CHAIN_STEP") {
    auto m = proto::ChainStep::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_chain_step(*m);
  }
  if (tag == "EVICT") {
    auto m = proto::EvictReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_evict(*m);
  }
  if (tag == "EVICT_INLINE") {
    auto m = proto::InlineDigest::decode(req);
    if (!m.ok()) co_return m.error();
    std::vector<LogEntry> entries;
    size_t pos = 0;
    while (pos < m->entries.size()) {
      size_t consumed = 0;
      auto e = log::decode_entry(m->entries.data() + pos,
                                 m->entries.size() - pos, &consumed);
      if (!e.ok()) co_return e.error();
      entries.push_back(std::move(e.value()));
      pos += consumed;
    }
    sim::Time deadline = w_.loop.now();
    auto st = digest_entries(entries, fs::Cred{m->uid, m->gid}, &deadline);
    if (!st.ok()) co_return st.error();
    uint64_t inc = incarnation_;
    co_await sim::sleep_until(w_.loop, deadline);
    if (inc != incarnation_) co_return Err::DstFailed;
    maybe_migrate();
    proto::EvictRep rep;
    rep.state_hash = area_->state_hash_subtree(m->subtree_id);
    co_return rep.encode();
  }
  if (tag == "DIGEST") {
    auto m = proto::LocalDigestReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_local_digest(*m);
  }
  if (tag == "RESIZE_RESERVE" || tag == "RESIZE_COMMIT" ||
      tag == "RESIZE_ABORT") {
    auto m = proto::ResizeReq::decode(req);
    if (!m.ok()) co_return m.error();
    auto key = std::make_pair(m->log_owner, m->subtree_id);
    if (tag == "RESIZE_RESERVE") {
      // Dissent when the node's simulated NVM budget cannot hold the
      // resized mirror.
      for (const auto& n : w_.cfg.nodes) {
        if (n.id == node_ && n.resize_budget != 0 &&
            m->new_capacity > n.resize_budget) {
          co_return Err::ReplicaOutOfMemory;
        }
      }
      resize_reserved_[key] = m->new_capacity;
      co_return Bytes{};
    }
    if (tag == "RESIZE_ABORT") {
      resize_reserved_.erase(key);
      co_return Bytes{};
    }
    // Commit: swap in a fresh mirror ring of the new size.
    resize_reserved_.erase(key);
    Mirror* mir = mirror_for(m->log_owner, m->subtree_id);
    if (!mir) co_return Err::UnknownRegion;
    auto st = w_.media.resize_region(mir->region, m->new_capacity);
    if (!st.ok()) co_return st.error();
    log::UpdateLog::put_superblock(w_.media, mir->region, 0, m->base_seq + 1,
                                   m->base_seq);
    mir->received_seq = m->base_seq;
    mir->digested_seq = m->base_seq;
    co_return Bytes{};
  }
  if (tag == "RESOLVE") {
    auto m = proto::ResolveReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_resolve(*m);
  }
  if (tag == "READ" || tag == "REMOTE_READ") {
    auto m = proto::ReadReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_read(*m, tag == "REMOTE_READ");
  }
  if (tag == "META") {
    ByteReader r(req);
    fs::InodeNum ino = r.u64();
    const SharedArea::NodeMeta* m = area_->meta(ino);
    if (!m) co_return Err::ENOENT_;
    // A rejoining replica's metadata may lag until its chains digest again.
    if (area_->pending_invalidation(ino)) co_return Err::ENOENT_;
    co_return SharedArea::serialize_meta(*m);
  }
  if (tag == "REJOIN_FETCH") {
    auto m = proto::RejoinFetchReq::decode(req);
    if (!m.ok()) co_return m.error();
    co_return co_await handle_rejoin_fetch(*m);
  }
  co_return Err::EINVAL_;
}

// --- lease protocol -----------------------------------------------------------

sim::Co<Result<std::string>> KernFs::resolve_manager(uint32_t subtree_id) {
  if (manages(subtree_id)) co_return id_;
  auto hint = mgr_hints_.find(subtree_id);
  if (hint != mgr_hints_.end() && w_.loop.now() < hint->second.second) {
    co_return hint->second.first;
  }
  proto::WhoManagesReq req;
  req.subtree_id = subtree_id;
  req.requester = id_;
  w_.metrics.add("lease_remote_hops");  // cluster consult leaves the node
  auto rep = co_await w_.net.rpc(id_, cluster::ClusterManager::kEndpoint,
                                 "WHO_MANAGES", req.encode());
  if (!rep.ok()) co_return rep.error();
  auto m = proto::WhoManagesRep::decode(*rep);
  if (!m.ok()) co_return m.error();
  if (m->manager == id_) {
    // Fresh assignment of an unmanaged subtree to this kernfs.
    install_managed(subtree_id);
  } else {
    mgr_hints_[subtree_id] = {m->manager, m->expiry};
  }
  co_return m->manager;
}

sim::Co<Result<Bytes>> KernFs::handle_acquire(proto::AcquireReq req,
                                              const std::string& via) {
  (void)via;
  uint64_t inc = incarnation_;
  for (int attempt = 0; attempt < 4; attempt++) {
    auto mgr = co_await resolve_manager(req.subtree_id);
    if (inc != incarnation_) co_return Err::DstFailed;
    if (!mgr.ok()) co_return mgr.error();
    if (*mgr == id_) {
      co_return co_await manager_grant(req);
    }
    if (w_.kernfs_by_id(*mgr) && w_.kernfs_by_id(*mgr)->node() != node_) {
      w_.metrics.add("lease_remote_hops");
    }
    auto rep = co_await w_.net.rpc(
        id_, *mgr, "FORWARD", req.encode(),
        w_.cfg.lease_term_ns + w_.cfg.lease_grace_ns + sim::kSec);
    if (inc != incarnation_) co_return Err::DstFailed;
    if (rep.ok()) co_return rep.value();
    if (rep.error() == Err::NotManager) {
      mgr_hints_.erase(req.subtree_id);
      continue;  // stale hint; re-consult the cluster manager
    }
    if (rep.error() == Err::DstFailed || rep.error() == Err::Timeout) {
      mgr_hints_.erase(req.subtree_id);
      co_await sim::sleep_for(w_.loop, 10 * sim::kMsec);
      if (inc != incarnation_) co_return Err::DstFailed;
      continue;  // manager failed; cluster will reassign
    }
    co_return rep.error();
  }
  co_return Err::LeaseTimeout;
}

sim::Co<Result<Unit>> KernFs::log_lease(const Lease& l, LeaseLogKind kind) {
  auto app = llog_->append(l.to_record(static_cast<uint8_t>(kind)));
  if (!app.ok()) co_return app.error();
  uint64_t inc = incarnation_;
  // Replicate the record positionally into the chain peers' mirrors of this
  // lease log before the grant completes.
  std::vector<sim::Future<Result<media::WriteTicket>>> writes;
  for (const auto& peer : w_.cluster().replica_kernfs(l.subtree_id)) {
    if (peer == id_) continue;
    KernFs* pk = w_.kernfs_by_id(peer);
    if (!pk || !w_.node_alive(pk->node())) continue;
    media::RegionId target = pk->mirror_of_peer_llog(id_);
    writes.push_back(w_.net.rdma_write(id_, peer, target, app->offset,
                                       app->framed, "LEASE_LOG"));
  }
  for (size_t i = 0; i < writes.size(); i++) {
    sim::Future<Result<media::WriteTicket>> f = writes[i];
    co_await f;  // dead peers surface errors; expiry covers those holders
  }
  if (inc != incarnation_) co_return Err::DstFailed;
  co_await sim::sleep_until(w_.loop, app->persist_at);
  if (inc != incarnation_) co_return Err::DstFailed;
  co_return Unit{};
}

sim::Co<Result<Bytes>> KernFs::manager_grant(proto::AcquireReq req) {
  uint64_t inc = incarnation_;
  for (int round = 0; round < 16; round++) {
    std::vector<coherence::Lease> to_revoke;
    {
      auto guard = co_await subtree_lock(req.subtree_id).lock();
      if (inc != incarnation_) co_return Err::DstFailed;
      if (!manages(req.subtree_id)) co_return Err::NotManager;
      if (round == 0) acquire_stats_[{req.subtree_id, req.home_kernfs}]++;

      // Permission gate: mode bits of the target when it is already
      // visible (the owner may always lease its own files).
      {
        auto target = [&]() -> const SharedArea::NodeMeta* {
          fs::InodeNum cur = fs::kRootInode;
          for (const auto& comp : fs::path_components(req.scope)) {
            auto next = area_->lookup(cur, comp);
            if (!next.ok()) return nullptr;
            cur = *next;
          }
          return area_->meta(cur);
        }();
        if (target && req.uid != 0 && req.uid != target->attrs.uid &&
            !fs::can_access(target->attrs, fs::Cred{req.uid, req.gid},
                            req.write)) {
          co_return Err::EACCES_;
        }
      }

      // Upgrade or refresh of the requester's own lease on this scope.
      // A lease already being revoked must not be handed back: the holder
      // waits for the transfer and then competes for a fresh grant.
      if (coherence::Lease* own = table_.own_lease(req.subtree_id, req.scope,
                                                   req.subtree, req.holder);
          own && !own->revoking) {
        if (own->write || !req.write) {
          own->expiry = w_.loop.now() + w_.cfg.lease_term_ns;
          own->holder_libfs = req.holder_libfs;
          own->home_kernfs = req.home_kernfs;
          proto::GrantRep rep{own->id, own->expiry};
          co_return rep.encode();
        }
        // Read-to-write upgrade: drop our read lease before the conflict
        // scan so it does not block itself.
        coherence::Lease old = *own;
        table_.erase(old.id);
        auto logged = co_await log_lease(old, LeaseLogKind::Release);
        if (!logged.ok()) co_return logged.error();
        if (inc != incarnation_) co_return Err::DstFailed;
      }

      auto conflicts = table_.conflicting(req.subtree_id, req.scope,
                                          req.subtree, req.write, req.holder);
      if (conflicts.empty()) {
        coherence::Lease l;
        l.id = (token_ << 20) | ++lease_counter_;
        l.subtree_id = req.subtree_id;
        l.scope = req.scope;
        l.subtree = req.subtree;
        l.write = req.write;
        l.holder = req.holder;
        l.holder_libfs = req.holder_libfs;
        l.home_kernfs = req.home_kernfs;
        l.expiry = w_.loop.now() + w_.cfg.lease_term_ns;
        table_.insert(l);
        auto logged = co_await log_lease(l, LeaseLogKind::Grant);
        if (!logged.ok()) {
          table_.erase(l.id);
          co_return logged.error();
        }
        if (inc != incarnation_) co_return Err::DstFailed;
        if (w_.lease_event_hook) w_.lease_event_hook(id_);
        proto::GrantRep rep{l.id, l.expiry};
        co_return rep.encode();
      }
      for (uint64_t id : conflicts) {
        if (coherence::Lease* lp = table_.find_mut(id)) {
          lp->revoking = true;
          to_revoke.push_back(*lp);
        }
      }
    }  // grant lock released during revocation

    for (const coherence::Lease& l : to_revoke) {
      if (inc != incarnation_) co_return Err::DstFailed;
      if (!table_.find(l.id)) continue;  // already gone
      if (w_.loop.now() >= l.expiry) {
        table_.erase(l.id);
        co_await log_lease(l, LeaseLogKind::Expire);
        if (inc != incarnation_) co_return Err::DstFailed;
        if (w_.lease_event_hook) w_.lease_event_hook(id_);
        continue;
      }
      proto::LeaseMsg msg;
      msg.lease_id = l.id;
      msg.subtree_id = l.subtree_id;
      msg.scope = l.scope;
      msg.subtree = l.subtree;
      msg.holder = l.holder;
      // Cooperative holders may take the whole grace period to finish
      // in-flight IO and evict before releasing.
      if (auto* hk = w_.kernfs_by_id(l.home_kernfs);
          hk && hk->node() != node_) {
        w_.metrics.add("lease_remote_hops");
      }
      auto rep = co_await w_.net.rpc(id_, l.home_kernfs, "REVOKE",
                                     msg.encode(),
                                     w_.cfg.lease_grace_ns + sim::kSec);
      if (inc != incarnation_) co_return Err::DstFailed;
      if (rep.ok()) {
        if (table_.find(l.id)) {
          table_.erase(l.id);
          co_await log_lease(l, LeaseLogKind::Release);
          if (inc != incarnation_) co_return Err::DstFailed;
          if (w_.lease_event_hook) w_.lease_event_hook(id_);
        }
      } else {
        // Holder unreachable or past grace: reclaimable only at expiry.
        co_await sim::sleep_until(w_.loop, l.expiry);
        if (inc != incarnation_) co_return Err::DstFailed;
        if (table_.find(l.id)) {
          table_.erase(l.id);
          co_await log_lease(l, LeaseLogKind::Expire);
          if (inc != incarnation_) co_return Err::DstFailed;
          if (w_.lease_event_hook) w_.lease_event_hook(id_);
        }
      }
    }
  }
  co_return Err::LeaseTimeout;
}

sim::Co<Result<Bytes>> KernFs::handle_release(proto::LeaseMsg msg) {
  const Lease* lp = table_.find(msg.lease_id);
  if (!lp) co_return Bytes{};  // already expired or migrated
  Lease l = *lp;
  table_.erase(msg.lease_id);
  co_await log_lease(l, LeaseLogKind::Release);
  if (w_.lease_event_hook) w_.lease_event_hook(id_);
  co_return Bytes{};
}

sim::Co<Result<Bytes>> KernFs::handle_renew(proto::LeaseMsg msg) {
  Lease* l = table_.find_mut(msg.lease_id);
  if (!l || l->holder != msg.holder || l->revoking) co_return Err::ENOENT_;
  l->expiry = w_.loop.now() + w_.cfg.lease_term_ns;
  proto::GrantRep rep{l->id, l->expiry};
  co_return rep.encode();
}

sim::Co<Result<Bytes>> KernFs::handle_revoke_relay(proto::LeaseMsg msg) {
  fs::LibFs* lf = w_.libfs(msg.holder);
  if (!lf || lf->dead() || lf->node() != node_) co_return Err::DstFailed;
  auto relay = w_.net.rpc(id_, lf->endpoint(), "REVOKE", msg.encode(),
                          w_.cfg.lease_grace_ns + 500 * sim::kMsec);
  auto done = co_await relay;
  if (!done.ok()) co_return done.error();
  co_return Bytes{};
}

sim::Co<Result<Bytes>> KernFs::handle_migrate_out(uint32_t subtree_id,
                                                  std::string to) {
  (void)to;
  uint64_t inc = incarnation_;
  auto guard = co_await subtree_lock(subtree_id).lock();
  if (inc != incarnation_) co_return Err::DstFailed;
  if (!manages(subtree_id)) co_return Err::NotManager;
  proto::MigrateTable table;
  table.subtree_id = subtree_id;
  table.from = id_;
  for (const Lease& l : table_.for_subtree(subtree_id)) {
    table.leases.push_back(l.to_record(
        static_cast<uint8_t>(LeaseLogKind::MigrateIn)));
  }
  table_.erase_subtree(subtree_id);
  drop_managed(subtree_id);
  co_return table.encode();
}

sim::Co<Result<Bytes>> KernFs::handle_migrate_in(proto::MigrateTable table) {
  for (const auto& rec : table.leases) {
    Lease l = Lease::from_record(rec);
    table_.insert(l);
    auto logged = co_await log_lease(l, LeaseLogKind::MigrateIn);
    if (!logged.ok()) co_return logged.error();
  }
  install_managed(table.subtree_id);
  if (w_.lease_event_hook) w_.lease_event_hook(id_);
  co_return Bytes{};
}

sim::Co<Result<Bytes>> KernFs::handle_takeover(uint32_t subtree_id,
                                               std::string failed_manager) {
  // Replay the replicated lease log of the failed manager to re-install
  // the exact grant state for this subtree.
  media::RegionId mirror = mirror_of_peer_llog(failed_manager);
  auto records = LeaseLog::scan(w_.media, mirror);
  coherence::LeaseTable live = LeaseLog::replay_live(records);
  uint64_t installed = 0;
  for (const Lease& l : live.all()) {
    if (l.subtree_id != subtree_id) continue;
    table_.insert(l);
    auto logged = co_await log_lease(l, LeaseLogKind::MigrateIn);
    if (!logged.ok()) co_return logged.error();
    installed++;
  }
  install_managed(subtree_id);
  if (w_.lease_event_hook) w_.lease_event_hook(id_);
  Bytes b;
  ByteWriter w(b);
  w.u64(installed);
  co_return b;
}

// --- replication & digestion ---------------------------------------------------

sim::Co<Result<Bytes>> KernFs::handle_open_mirror(proto::OpenMirrorReq req,
                                                  std::string src) {
  (void)src;
  std::string name =
      id_ + "/mlog/" + req.log_owner + "/" + std::to_string(req.subtree_id);
  media::RegionId region = w_.media.find_region(node_, name);
  if (region == 0) {
    region = w_.media.create_region(node_, media::Tier::NVM, name,
                                    req.capacity);
    log::UpdateLog::put_superblock(w_.media, region, 0, 1, 0);
  }
  // The owner and any chain peer may forward bytes into this mirror.
  w_.net.register_region(id_, region, req.writer_endpoint);
  for (const auto& k : w_.all_kernfs_ids()) {
    if (k != id_) w_.net.register_region(id_, region, k);
  }
  Mirror& m = mirrors_[{req.log_owner, req.subtree_id}];
  m.region = region;
  m.owner = req.log_owner;
  m.subtree_id = req.subtree_id;
  if (req.reset) {
    // head_seq is mirror-space (ring scan); the digested field tracks the
    // log-space frontier covered so far.
    log::UpdateLog::put_superblock(w_.media, region, req.ring_off,
                                   req.base_seq + 1, req.log_seq);
    m.received_seq = req.log_seq;
    m.digested_seq = req.log_seq;
    m.digested_mirror_seq = req.base_seq;
  } else {
    auto scan = log::UpdateLog::scan_region(w_.media, region);
    if (scan.ok()) {
      m.digested_seq = scan->digested_seq;
      m.received_seq = scan->digested_seq;
      m.digested_mirror_seq = scan->head_seq - 1;
    }
  }
  Bytes b;
  ByteWriter w(b);
  w.u64(region);
  w.u64(m.received_seq);
  co_return b;
}

sim::Co<Result<Bytes>> KernFs::handle_chain_step(proto::ChainStep step) {
  Mirror* m = mirror_for(step.log_owner, step.subtree_id);
  if (!m) co_return Err::UnknownRegion;
  uint64_t inc = incarnation_;

  // The one-sided writes for this frame were issued ahead of this message
  // on the same connection; flush them before acknowledging anything.
  co_await sim::sleep_until(w_.loop,
                            w_.media.last_persist_deadline(m->region));
  if (inc != incarnation_) co_return Err::DstFailed;

  if (step.covers_from > m->received_seq + 1) co_return Err::EINVAL_;

  // Forward down the chain, bytes first, then the step.
  if (!step.rest.empty()) {
    auto [next_ep, next_region] = step.rest.front();
    proto::ChainStep fwd = step;
    fwd.rest.erase(fwd.rest.begin());
    for (const auto& [ring_off, len] : step.writes) {
      auto bytes = w_.media.read(m->region, log::kLogSuperblockSize + ring_off,
                                 len);
      if (!bytes.ok()) co_return bytes.error();
      w_.net.rdma_write(id_, next_ep, next_region,
                        log::kLogSuperblockSize + ring_off,
                        std::move(bytes.value()), "SEGMENT_WRITE");
    }
    auto ack = co_await w_.net.rpc(id_, next_ep, "CHAIN_STEP", fwd.encode());
    if (inc != incarnation_) co_return Err::DstFailed;
    if (!ack.ok()) co_return ack.error();
  }

  m->received_seq = std::max(m->received_seq, step.covers_to);
  proto::EvictRep rep;
  rep.digested_through = step.covers_to;
  co_return rep.encode();  // CHAIN_ACK payload
}

Result<Unit> KernFs::digest_entries(const std::vector<LogEntry>& entries,
                                    const fs::Cred& writer,
                                    sim::Time* deadline) {
  // Group consecutive entries by transaction; apply complete groups only.
  size_t i = 0;
  while (i < entries.size()) {
    size_t j = i;
    bool complete = false;
    while (j < entries.size() && entries[j].txn == entries[i].txn) {
      complete = entries[j].txn_last();
      j++;
    }
    if (!complete) break;  // torn batch at the tail: discard
    std::vector<LogEntry> batch(entries.begin() + i, entries.begin() + j);
    auto r = area_->apply_batch(writer, batch[0].txn, batch, epoch_);
    if (!r.ok()) return r.error();
    *deadline = std::max(*deadline, *r);
    i = j;
  }
  return Unit{};
}

sim::Co<Result<uint64_t>> KernFs::digest_mirror(Mirror& m,
                                                uint64_t through_log_seq,
                                                const fs::Cred& writer) {
  uint64_t inc = incarnation_;
  active_digests_++;
  struct Scope {
    uint64_t* n;
    ~Scope() { (*n)--; }
  } scope{&active_digests_};
  co_await sim::sleep_until(w_.loop,
                            w_.media.last_persist_deadline(m.region));
  if (inc != incarnation_) co_return Err::DstFailed;

  auto scan = log::UpdateLog::scan_region(w_.media, m.region);
  if (!scan.ok()) co_return scan.error();

  // Entry seqs in a mirror are mirror-space (dense even when the stream
  // was coalesced); digest every complete batch in the ring. Incomplete
  // batches at the tail (a torn frame after a crash) are discarded.
  std::vector<LogEntry> todo;
  uint64_t bytes = 0;
  for (auto& e : scan->live) {
    if (e.seq > m.digested_mirror_seq) {
      bytes += log::entry_media_size(e.payload.size());
      todo.push_back(std::move(e));
    }
  }
  sim::Time deadline = w_.loop.now();
  auto st = digest_entries(todo, writer, &deadline);
  if (!st.ok()) co_return st.error();
  co_await sim::sleep_until(w_.loop, deadline);
  if (inc != incarnation_) co_return Err::DstFailed;

  uint64_t digested_log =
      std::max(m.digested_seq, std::min(through_log_seq, m.received_seq));
  log::UpdateLog::put_superblock(w_.media, m.region, scan->tail_off,
                                 scan->tail_seq + 1, digested_log);
  m.digested_mirror_seq = scan->tail_seq;
  m.digested_seq = digested_log;
  w_.metrics.add("replica_digests");
  w_.metrics.add("replica_digest_bytes", bytes);
  maybe_migrate();
  co_return digested_log;
}

sim::Co<Result<Bytes>> KernFs::handle_evict(proto::EvictReq req) {
  Mirror* m = mirror_for(req.log_owner, req.subtree_id);
  if (!m) co_return Err::UnknownRegion;
  auto digested = co_await digest_mirror(*m, req.through_seq,
                                         fs::Cred{req.uid, req.gid});
  if (!digested.ok()) co_return digested.error();
  proto::EvictRep rep;
  rep.digested_through = *digested;
  rep.state_hash = area_->state_hash_subtree(req.subtree_id);
  co_return rep.encode();
}

sim::Task KernFs::evict_failed_owner_mirrors(media::NodeId failed) {
  // Fail-over work at a cache replica: evict the per-process mirrored logs
  // of every process that lived on the failed node (complete batches only;
  // an unacknowledged torn suffix is discarded).
  uint64_t inc = incarnation_;
  sim::Time t0 = w_.loop.now();
  uint64_t before = w_.metrics.get("replica_digest_bytes");
  for (auto& [key, m] : mirrors_) {
    fs::LibFs* owner = w_.instance_by_owner(key.first);
    if (!owner || owner->node() != failed) continue;
    co_await digest_mirror(m, m.received_seq, fs::Cred{0, 0});
    if (inc != incarnation_) co_return;
  }
  w_.metrics.add("failover_evictions");
  w_.metrics.add("failover_work_ns", w_.loop.now() - t0);
  w_.metrics.add("failover_work_bytes",
                 w_.metrics.get("replica_digest_bytes") - before);
}

sim::Co<Result<Bytes>> KernFs::handle_local_digest(proto::LocalDigestReq req) {
  uint64_t inc = incarnation_;
  active_digests_++;
  struct Scope {
    uint64_t* n;
    ~Scope() { (*n)--; }
  } scope{&active_digests_};
  auto scan = log::UpdateLog::scan_region(w_.media, req.log_region);
  if (!scan.ok()) co_return scan.error();
  std::vector<LogEntry> todo;
  for (auto& e : scan->live) {
    if (e.seq < req.from_seq || e.seq > req.through_seq) continue;
    if (area_->role_of(e.subtree) == Role::CacheReplica &&
        w_.cfg.chain_for_subtree(e.subtree) &&
        w_.cfg.node_in_chain(node_, *w_.cfg.chain_for_subtree(e.subtree))) {
      todo.push_back(std::move(e));
    }
  }
  sim::Time deadline = w_.loop.now();
  auto st = digest_entries(todo, fs::Cred{req.uid, req.gid}, &deadline);
  if (!st.ok()) co_return st.error();
  co_await sim::sleep_until(w_.loop, deadline);
  if (inc != incarnation_) co_return Err::DstFailed;
  w_.metrics.add("local_digests");
  maybe_migrate();
  proto::EvictRep rep;
  rep.digested_through = req.through_seq;
  rep.state_hash = 0;
  co_return rep.encode();
}

void KernFs::maybe_migrate() {
  auto rep = area_->migrate_lru();
  if (rep.bytes_moved > 0) {
    w_.metrics.add("lru_migrated_bytes", rep.bytes_moved);
  }
  if (rep.enospc) w_.metrics.add("migration_enospc");
}

// --- reads ---------------------------------------------------------------------

Result<std::vector<KernFs::ExtentSnapshot>> KernFs::snapshot_extents(
    fs::InodeNum ino, const fs::Cred& cred) {
  const SharedArea::NodeMeta* m = area_->meta(ino);
  if (!m) return Err::ENOENT_;
  if (!fs::can_access(m->attrs, cred, false)) return Err::EACCES_;
  if (area_->pending_invalidation(ino)) return Err::ENOENT_;
  std::vector<ExtentSnapshot> out;
  auto eit = area_->extents().find(ino);
  if (eit != area_->extents().end()) {
    for (const auto& [b, e] : eit->second) {
      ExtentSnapshot s;
      s.begin = b;
      s.end = e.end;
      s.tier = e.tier;
      s.region = e.tier == PlaceTier::HotNvm || e.tier == PlaceTier::ReserveNvm
                     ? area_->journal_region()
                     : 0;
      s.region_off = e.region_off;
      out.push_back(s);
    }
  }
  return out;
}

sim::Co<Result<Bytes>> KernFs::handle_read(proto::ReadReq req, bool remote) {
  const SharedArea::NodeMeta* m = area_->meta(req.ino);
  if (!m) co_return Err::ENOENT_;
  if (!fs::can_access(m->attrs, fs::Cred{req.uid, req.gid}, false)) {
    co_return Err::EACCES_;
  }
  if (!area_->covers(req.ino, req.off, req.len)) co_return Err::ENOENT_;

  uint64_t end = std::min(req.off + req.len, m->size);
  auto hits = area_->read(req.ino, req.off, req.len);
  uint8_t worst_tier = 0;
  Bytes out(end > req.off ? end - req.off : 0, 0);
  for (auto& h : hits) {
    std::copy(h.data.begin(), h.data.end(), out.begin() + (h.begin - req.off));
    worst_tier = std::max(worst_tier, static_cast<uint8_t>(h.tier));
    // A promoted reserve replica warms its NVM on SSD hits.
    if (h.tier == PlaceTier::HotSsd &&
        area_->role_of(m->subtree) == Role::CacheReplica) {
      area_->repopulate(req.ino, h.begin, h.data);
    }
  }
  if (remote) {
    // Payload only; it is RDMA-written into the requester's cache.
    co_return out;
  }
  Bytes b;
  ByteWriter w(b);
  w.u64(m->size);
  w.u8(worst_tier);
  w.u32(static_cast<uint32_t>(out.size()));
  w.raw(out);
  co_return b;
}

sim::Co<Result<Bytes>> KernFs::handle_resolve(proto::ResolveReq req) {
  fs::InodeNum cur = fs::kRootInode;
  for (const auto& comp : fs::path_components(req.path)) {
    auto next = area_->lookup(cur, comp);
    if (!next.ok()) co_return next.error();
    cur = *next;
  }
  const SharedArea::NodeMeta* m = area_->meta(cur);
  if (!m) co_return Err::ENOENT_;
  Bytes b;
  ByteWriter w(b);
  w.u64(cur);
  w.raw(SharedArea::serialize_meta(*m));
  co_return b;
}

sim::Co<Result<Bytes>> KernFs::handle_rejoin_fetch(proto::RejoinFetchReq req) {
  // The reply must reflect every digest that predates the requester's
  // chain re-entry: drain in-flight digests first. Anything started after
  // re-entry reaches the requester through replication instead.
  uint64_t inc = incarnation_;
  while (active_digests_ > 0) {
    co_await sim::sleep_for(w_.loop, 100 * sim::kUsec);
    if (inc != incarnation_) co_return Err::DstFailed;
  }
  Bytes bitmaps = area_->serialize_bitmaps(req.from_epoch);
  std::set<fs::InodeNum> flagged;
  for (const auto& [epoch, inos] : area_->epoch_bitmaps()) {
    if (epoch < req.from_epoch) continue;
    flagged.insert(inos.begin(), inos.end());
  }
  Bytes b;
  ByteWriter w(b);
  w.u32(static_cast<uint32_t>(bitmaps.size()));
  w.raw(bitmaps);
  w.u32(static_cast<uint32_t>(flagged.size()));
  for (fs::InodeNum ino : flagged) {
    w.u64(ino);
    const SharedArea::NodeMeta* m = area_->meta(ino);
    w.u8(m != nullptr);
    if (m) {
      Bytes mb = SharedArea::serialize_meta(*m);
      w.u32(static_cast<uint32_t>(mb.size()));
      w.raw(mb);
    }
  }
  co_return b;
}

std::vector<fs::InodeNum> KernFs::rejoin_invalidate(const RejoinData& data) {
  std::vector<fs::InodeNum> invalidated;
  for (const auto& [ino, entry] : data.metas) {
    const auto& [exists, meta] = entry;
    if (exists) {
      area_->install_meta(ino, meta);
      area_->invalidate_inode(ino);
    } else {
      area_->drop_inode(ino);
    }
    invalidated.push_back(ino);
  }
  w_.metrics.add("rejoin_invalidated", invalidated.size());
  return invalidated;
}

// --- recovery --------------------------------------------------------------------

sim::Task KernFs::recover_dead_libfs(fs::LibFs* dead) {
  uint64_t inc = incarnation_;
  media::RegionId region = dead->log_region();
  note_local_log(dead->owner_string(), region);
  auto scan = log::UpdateLog::scan_region(w_.media, region);
  if (scan.ok()) {
    std::vector<LogEntry> todo;
    for (auto& e : scan->live) {
      if (e.seq > scan->digested_seq) todo.push_back(std::move(e));
    }
    // Local digest for subtrees this node replicates.
    std::vector<LogEntry> local;
    std::map<uint32_t, std::vector<LogEntry>> by_subtree;
    for (auto& e : todo) {
      by_subtree[e.subtree].push_back(e);
      const auto* chain = w_.cfg.chain_for_subtree(e.subtree);
      if (chain && w_.cfg.node_in_chain(node_, *chain)) local.push_back(e);
    }
    fs::Cred writer{0, 0};
    sim::Time deadline = w_.loop.now();
    digest_entries(local, writer, &deadline);
    co_await sim::sleep_until(w_.loop, deadline);
    if (inc != incarnation_) co_return;

    // The unreplicated suffix still has to reach the chain; replicas
    // deduplicate transactions they already digested.
    for (auto& [subtree, entries] : by_subtree) {
      proto::InlineDigest msg;
      msg.log_owner = dead->owner_string();
      msg.subtree_id = subtree;
      for (const auto& e : entries) {
        Bytes enc = log::encode_entry(e);
        msg.entries.insert(msg.entries.end(), enc.begin(), enc.end());
      }
      std::vector<std::string> targets = w_.cluster().replica_kernfs(subtree);
      std::string res = w_.cluster().reserve_kernfs(subtree);
      if (!res.empty()) targets.push_back(res);
      for (const auto& t : targets) {
        if (t == id_) continue;
        co_await w_.net.rpc(id_, t, "EVICT_INLINE", msg.encode());
        if (inc != incarnation_) co_return;
      }
    }
    if (!todo.empty()) {
      log::UpdateLog::put_superblock(w_.media, region, scan->tail_off,
                                     scan->tail_seq + 1, scan->tail_seq);
    }
  }
  maybe_migrate();

  // Then expire the dead process's leases at their managers.
  for (const auto& [id, lease] : dead->held_leases()) {
    proto::LeaseMsg msg;
    msg.lease_id = lease->id;
    msg.subtree_id = lease->subtree_id;
    msg.scope = lease->scope;
    msg.subtree = lease->subtree;
    msg.holder = lease->holder;
    auto mgr = co_await resolve_manager(lease->subtree_id);
    if (inc != incarnation_) co_return;
    if (!mgr.ok()) continue;
    if (*mgr == id_) {
      co_await handle_release(msg);
    } else {
      co_await w_.net.rpc(id_, *mgr, "RELEASE", msg.encode());
    }
    if (inc != incarnation_) co_return;
  }
  w_.metrics.add("dead_libfs_recoveries");
}

sim::Future<Result<Unit>> KernFs::local_recover(bool digest_dead_logs) {
  auto co = [](KernFs* self, bool digest_dead) -> sim::Co<Result<Unit>> {
    world::World& w = self->w_;
    uint64_t inc = self->incarnation_;
    auto recs = self->area_->recover_from_journal();
    if (!recs.ok()) co_return recs.error();
    self->llog_->mount();

    for (const auto& [owner, region] : w.logs_on_node(self->node_)) {
      auto scan = log::UpdateLog::scan_region(w.media, region);
      if (!scan.ok()) continue;  // never formatted
      if (digest_dead) {
        // Evict (digest) the dead update logs; log-based eviction is
        // idempotent, so anything digested before the crash converges.
        std::vector<LogEntry> todo;
        for (auto& e : scan->live) {
          if (e.seq > scan->digested_seq) todo.push_back(std::move(e));
        }
        fs::Cred writer{0, 0};
        sim::Time deadline = w.loop.now();
        auto st = self->digest_entries(todo, writer, &deadline);
        if (st.ok() && !todo.empty()) {
          co_await sim::sleep_until(w.loop, deadline);
          if (inc != self->incarnation_) co_return Err::DstFailed;
          log::UpdateLog::put_superblock(w.media, region, scan->tail_off,
                                         scan->tail_seq + 1, scan->tail_seq);
        }
      } else {
        // The chain failed over: the suffix beyond the adopted prefix is
        // lost. Seal the log so no later recovery resurrects it.
        log::UpdateLog::put_superblock(w.media, region, scan->tail_off,
                                       scan->tail_seq + 1, scan->tail_seq);
      }
    }
    w.metrics.add("local_recoveries");
    co_return Unit{};
  }(this, digest_dead_logs);
  return co.fut;
}

}  // namespace cfs::kernfs
