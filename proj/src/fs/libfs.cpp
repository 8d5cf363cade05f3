/*
 * libfs.cpp
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

#include "fs/libfs.hpp"

#include <algorithm>

#include "cluster/cluster_manager.hpp"
#include "log/coalesce.hpp"
#include "kernfs/kernfs.hpp"

namespace cfs::fs {

using coherence::Lease;
using log::LogEntry;
using log::OpKind;

namespace {
constexpr uint64_t kMaxEntryPayload = 256u << 10;
constexpr int kAppendRetries = 6;
constexpr int kChainRetries = 40;

}  // namespace

LibFs::LibFs(world::World& w, std::string name, media::NodeId node, Cred cred,
             Mode mode, uint64_t incarnation)
    : w_(w),
      name_(std::move(name)),
      node_(std::move(node)),
      cred_(cred),
      mode_(mode),
      inc_(incarnation) {
  ep_ = node_ + "/" + name_ + "." + std::to_string(inc_);
  proc_index_ = w_.proc_index(name_);

  media::RegionId log_region = w_.media.create_region(
      node_, media::Tier::NVM, ep_ + "/log", w_.cfg.log_capacity);
  log_ = std::make_unique<log::UpdateLog>(w_.loop, w_.media, log_region, ep_,
                                          (proc_index_ << 8) | inc_);
  log_->format();

  media::RegionId cache_region = w_.media.create_region(
      node_, media::Tier::DRAM, ep_ + "/rcache", w_.cfg.read_cache_capacity);
  rcache_ = std::make_unique<ReadCache>(w_.media, cache_region);

  w_.net.add_endpoint(ep_, node_);
  // Any kernfs may RDMA-write read replies straight into this cache.
  for (const auto& k : w_.all_kernfs_ids()) {
    w_.net.register_region(ep_, cache_region, k);
  }
  w_.net.set_rpc_handler(
      ep_, [this](const std::string& src, const std::string& tag,
                  const Bytes& req) {
        sim::Future<Result<Bytes>> out;
        if (tag != "REVOKE" || dead_) {
          out.fulfill(Err::DstFailed);
          return out;
        }
        auto m = proto::LeaseMsg::decode(req);
        if (!m.ok()) {
          out.fulfill(m.error());
          return out;
        }
        auto co = [](LibFs* self, proto::LeaseMsg msg,
                     sim::Future<Result<Bytes>> done) -> sim::Task {
          auto r = co_await self->handle_revoke(msg);
          if (r.ok()) {
            done.try_fulfill(Bytes{});
          } else {
            done.try_fulfill(r.error());
          }
        };
        co(this, *m, out);
        return out;
      });
}

std::string LibFs::local_kernfs() const { return node_ + "/k0"; }

InodeNum LibFs::alloc_ino() {
  return (proc_index_ << 44) | (inc_ << 36) | ++ino_counter_;
}

// --- leases ---------------------------------------------------------------------

LibFs::LeasePtr LibFs::covering(const std::string& path, bool write) {
  for (auto& [id, l] : leases_) {
    if (l->revoking || w_.loop.now() >= l->expiry) continue;
    if (coherence::lease_covers(*l, path, write)) return l;
  }
  return nullptr;
}

void LibFs::lease_usage(uint64_t lease_id, int delta) {
  lease_usage_[lease_id] += delta;
  CFS_ASSERT(lease_usage_[lease_id] >= 0);
}

sim::Co<Result<LibFs::LeasePtr>> LibFs::acquire(std::string scope,
                                                bool subtree, bool write) {
  uint64_t inc = inc_;
  if (LeasePtr have = covering(scope, write)) {
    if (!subtree || (have->subtree && have->scope == scope)) {
      // Renew when the term is half way gone.
      if (have->expiry - w_.loop.now() < w_.cfg.lease_term_ns / 2) {
        proto::LeaseMsg msg;
        msg.lease_id = have->id;
        msg.subtree_id = have->subtree_id;
        msg.scope = have->scope;
        msg.subtree = have->subtree;
        msg.holder = name_;
        auto rep = co_await w_.net.rpc(ep_, local_kernfs(), "RENEW",
                                       msg.encode());
        if (!alive(inc)) co_return Err::DstFailed;
        if (rep.ok()) {
          auto g = proto::GrantRep::decode(*rep);
          if (g.ok()) {
            have = covering(scope, write);
            if (have) {
              have->expiry = g->expiry;
              co_return have;
            }
          }
        }
        // Fall through to a fresh acquire when renewal failed.
      } else {
        co_return have;
      }
    }
  }

  proto::AcquireReq req;
  req.scope = scope;
  req.subtree = subtree;
  req.write = write;
  req.subtree_id = w_.cfg.subtree_of(scope);
  if (req.subtree_id == 0) co_return Err::ENOENT_;
  req.holder = name_;
  req.holder_libfs = ep_;
  req.home_kernfs = local_kernfs();
  req.uid = cred_.uid;
  req.gid = cred_.gid;

  auto guard = co_await acquire_mutex_.lock();
  if (!alive(inc)) co_return Err::DstFailed;
  if (LeasePtr have = covering(scope, write)) co_return have;

  auto rep = co_await w_.net.rpc(ep_, local_kernfs(), "ACQUIRE", req.encode(),
                                 2 * (w_.cfg.lease_term_ns +
                                      w_.cfg.lease_grace_ns));
  if (!alive(inc)) co_return Err::DstFailed;
  if (!rep.ok()) {
    co_return rep.error() == Err::Timeout ? Err::LeaseTimeout : rep.error();
  }
  auto g = proto::GrantRep::decode(*rep);
  if (!g.ok()) co_return g.error();
  auto l = std::make_shared<Lease>();
  l->id = g->lease_id;
  l->subtree_id = req.subtree_id;
  l->scope = scope;
  l->subtree = subtree;
  l->write = write;
  l->holder = name_;
  l->holder_libfs = ep_;
  l->home_kernfs = req.home_kernfs;
  l->expiry = g->expiry;
  if (!leases_.count(l->id)) {
    // A fresh tenure: anything cached under this scope predates the grant
    // and may be stale (another holder could have mutated it in between).
    drop_view_under(scope, subtree);
  }
  leases_[l->id] = l;
  w_.metrics.add("lease_acquires_" + owner_string());
  co_return l;
}

sim::Co<Result<Unit>> LibFs::handle_revoke(proto::LeaseMsg msg) {
  uint64_t inc = inc_;
  auto it = leases_.find(msg.lease_id);
  if (it == leases_.end()) co_return Unit{};  // already released or expired
  // No new operation may ride this lease from here on.
  it->second->revoking = true;

  // Grace: let in-flight IO that uses this lease finish first.
  while (lease_usage_[msg.lease_id] > 0) {
    co_await sim::sleep_for(w_.loop, 50 * sim::kUsec);
    if (!alive(inc)) co_return Err::DstFailed;
  }

  // Dirty state must be clean and replicated before the lease transfers.
  auto evicted = co_await evict_private_cache();
  if (!alive(inc)) co_return Err::DstFailed;
  if (!evicted.ok()) co_return evicted.error();

  auto again = leases_.find(msg.lease_id);
  if (again != leases_.end()) {
    drop_view_under(again->second->scope, again->second->subtree);
    leases_.erase(again);
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::release_all_leases() {
  uint64_t inc = inc_;
  for (auto& [id, l] : leases_) {
    proto::LeaseMsg msg;
    msg.lease_id = id;
    msg.subtree_id = l->subtree_id;
    msg.scope = l->scope;
    msg.subtree = l->subtree;
    msg.holder = name_;
    co_await w_.net.rpc(ep_, local_kernfs(), "RELEASE", msg.encode());
    if (!alive(inc)) co_return Err::DstFailed;
  }
  leases_.clear();
  co_return Unit{};
}

// --- view ----------------------------------------------------------------------

LibFs::ViewPtr LibFs::view(InodeNum ino) {
  auto it = view_.find(ino);
  return it == view_.end() ? nullptr : it->second;
}

void LibFs::drop_view_under(const std::string& scope, bool subtree) {
  std::vector<std::string> doomed;
  for (const auto& [path, ino] : path_cache_) {
    bool covered = subtree ? path_is_or_under(path, scope) : path == scope;
    if (covered) doomed.push_back(path);
  }
  for (const auto& p : doomed) {
    auto it = path_cache_.find(p);
    if (it != path_cache_.end()) {
      view_.erase(it->second);
      mapping_.erase(it->second);
      path_cache_.erase(it);
    }
  }
}

sim::Co<Result<InodeNum>> LibFs::resolve(const std::string& path,
                                         bool want_parent) {
  uint64_t inc = inc_;
  std::string target = want_parent ? parent_path(path) : path;
  if (!path_valid(target)) co_return Err::EINVAL_;
  if (target == "/") co_return kRootInode;
  if (auto cached = path_cache_.find(target); cached != path_cache_.end()) {
    if (covering(target, false)) co_return cached->second;
    path_cache_.erase(cached);
  }

  // Subtree roots have fixed inodes.
  uint32_t subtree = w_.cfg.subtree_of(target);
  if (subtree == 0) co_return Err::ENOENT_;
  const auto* chain = w_.cfg.chain_for_subtree(subtree);
  if (chain->root == target) co_return w_.cfg.subtree_root_ino(subtree);

  // Walk components, preferring our own coherent view, falling back to the
  // serving kernfs for uncached lookups.
  InodeNum cur = kRootInode;
  std::string prefix = "";
  for (const auto& comp : path_components(target)) {
    prefix += "/" + comp;
    if (auto pc = path_cache_.find(prefix); pc != path_cache_.end()) {
      if (covering(prefix, false)) {
        cur = pc->second;
        continue;
      }
      path_cache_.erase(pc);
    }
    ViewPtr v = view(cur);
    std::string cur_path = prefix.substr(0, prefix.size() - comp.size() - 1);
    if (cur_path.empty()) cur_path = "/";
    bool covered = cur != kRootInode && covering(cur_path, false) != nullptr;
    if (v && v->have_dirents && covered) {
      auto d = v->dirents.find(comp);
      if (d == v->dirents.end()) co_return Err::ENOENT_;
      cur = d->second;
      continue;
    }
    // Remote or local kernfs lookup of this prefix.
    std::string server;
    if (w_.cfg.node_in_chain(node_, *chain)) {
      server = local_kernfs();
    } else {
      auto reps = w_.cluster().replica_kernfs(subtree);
      if (reps.empty()) co_return Err::ChainUnavailable;
      server = reps.front();
    }
    proto::ResolveReq rr;
    rr.path = prefix;
    rr.uid = cred_.uid;
    rr.gid = cred_.gid;
    auto rep = co_await w_.net.rpc(ep_, server, "RESOLVE", rr.encode());
    if (!alive(inc)) co_return Err::DstFailed;
    if (!rep.ok()) co_return rep.error();
    ByteReader r(*rep);
    cur = r.u64();
    if (!r.ok()) co_return Err::ParseError;
  }
  co_return cur;
}

sim::Co<Result<LibFs::ViewPtr>> LibFs::fault_in(const std::string& path,
                                                InodeNum ino,
                                                bool need_dirents) {
  uint64_t inc = inc_;
  LeasePtr cov = covering(path, false);
  ViewPtr v = view(ino);
  if (v && (!need_dirents || v->have_dirents) && cov) {
    path_cache_[path] = ino;
    co_return v;
  }
  uint32_t subtree = w_.cfg.subtree_of(path);
  const auto* chain = w_.cfg.chain_for_subtree(subtree);
  if (!chain) co_return Err::ENOENT_;
  std::vector<std::string> servers;
  if (w_.cfg.node_in_chain(node_, *chain)) servers.push_back(local_kernfs());
  for (const auto& r : w_.cluster().replica_kernfs(subtree)) {
    auto* kf = w_.kernfs_by_id(r);
    if (kf && kf->node() != node_) servers.push_back(r);
  }
  if (servers.empty()) co_return Err::ChainUnavailable;
  Bytes req;
  ByteWriter w(req);
  w.u64(ino);
  Result<Bytes> rep = Err::ENOENT_;
  for (const auto& server : servers) {
    rep = co_await w_.net.rpc(ep_, server, "META", req);
    if (!alive(inc)) co_return Err::DstFailed;
    if (rep.ok()) break;  // a recovering local copy defers to its peers
  }
  if (!rep.ok()) co_return rep.error();
  auto meta = kernfs::SharedArea::parse_meta(*rep);
  if (!meta.ok()) co_return meta.error();
  auto node = std::make_shared<ViewNode>();
  node->kind = meta->kind;
  node->attrs = meta->attrs;
  node->size = meta->size;
  node->mtime = meta->mtime;
  node->subtree = meta->subtree == 0 ? subtree : meta->subtree;
  node->dirents = meta->dirents;
  node->have_dirents = true;
  view_[ino] = node;
  path_cache_[path] = ino;
  co_return node;
}

// --- write path ------------------------------------------------------------------

sim::Co<Result<uint64_t>> LibFs::append_entry(OpKind kind, InodeNum ino,
                                              uint64_t offset, Bytes payload,
                                              uint32_t subtree) {
  uint64_t inc = inc_;
  uint64_t mtime = now_mtime();
  for (int attempt = 0; attempt < kAppendRetries; attempt++) {
    auto seq = log_->append(kind, ino, offset, payload, subtree, mtime);
    if (seq.ok()) {
      if (w_.append_hook) {
        LogEntry shadow;
        shadow.seq = *seq;
        shadow.txn = *seq;
        shadow.kind = kind;
        shadow.inode = ino;
        shadow.offset = offset;
        shadow.mtime = mtime;
        shadow.subtree = subtree;
        shadow.payload = payload;
        w_.append_hook(name_, inc_, shadow);
      }
      w_.metrics.add("log_appends");
      co_await maybe_trigger_digest();
      if (!alive(inc)) co_return Err::DstFailed;
      co_return *seq;
    }
    if (seq.error() == Err::CapacityExceeded) co_return Err::ENOSPC_;
    // Log full: wait out the in-flight digest (or run one) and retry.
    auto ev = co_await evict_private_cache();
    if (!alive(inc)) co_return Err::DstFailed;
    if (!ev.ok()) co_return ev.error();
  }
  co_return Err::ENOSPC_;
}

sim::Co<Result<Unit>> LibFs::maybe_trigger_digest() {
  if (digest_in_progress_) co_return Unit{};
  uint64_t threshold = static_cast<uint64_t>(
      static_cast<double>(log_->capacity()) * w_.cfg.digest_trigger);
  if (log_->used() < threshold) co_return Unit{};
  co_return co_await evict_private_cache();
}

// --- replication -------------------------------------------------------------------

sim::Co<Result<LibFs::ChainSession*>> LibFs::chain_session(
    uint32_t subtree_id) {
  auto it = chains_.find(subtree_id);
  if (it != chains_.end()) co_return &it->second;
  ChainSession cs;
  cs.subtree_id = subtree_id;
  chains_[subtree_id] = cs;
  co_return &chains_[subtree_id];
}

sim::Co<Result<uint64_t>> LibFs::open_mirror(const std::string& kernfs_ep,
                                             uint32_t subtree_id, bool reset,
                                             uint64_t base_seq,
                                             uint64_t ring_off) {
  uint64_t inc = inc_;
  auto cs_it = chains_.find(subtree_id);
  proto::OpenMirrorReq req;
  req.log_owner = owner_string();
  req.subtree_id = subtree_id;
  req.capacity = log_->capacity() + log::kLogSuperblockSize;
  req.reset = reset;
  req.base_seq = base_seq;
  req.log_seq = cs_it != chains_.end() ? cs_it->second.acked_seq : 0;
  req.ring_off = ring_off;
  req.writer_endpoint = ep_;
  auto rep = co_await w_.net.rpc(ep_, kernfs_ep, "OPEN_MIRROR", req.encode());
  if (!alive(inc)) co_return Err::DstFailed;
  if (!rep.ok()) co_return rep.error();
  ByteReader r(*rep);
  uint64_t region = r.u64();
  if (!r.ok()) co_return Err::ParseError;
  co_return region;
}

void LibFs::refresh_replicated_watermark() {
  uint64_t w = ~uint64_t{0};
  bool any = false;
  for (const auto& [id, cs] : chains_) {
    w = std::min(w, cs.acked_seq);
    any = true;
  }
  if (!any) return;
  if (w > log_->replicated_seq()) log_->set_replicated_seq(w);
}

std::vector<std::string> LibFs::chain_targets(uint32_t subtree_id) const {
  std::vector<std::string> targets;
  for (const auto& k : w_.cluster().replica_kernfs(subtree_id)) {
    auto* kf = const_cast<world::World&>(w_).kernfs_by_id(k);
    if (kf && kf->node() == node_) continue;
    targets.push_back(k);
  }
  std::string res = w_.cluster().reserve_kernfs(subtree_id);
  if (!res.empty()) targets.push_back(res);
  return targets;
}

void LibFs::extract_frame(ChainSession& cs, uint64_t through_seq) {
  if (through_seq <= cs.extracted_seq) return;
  auto entries = log_->entries_for_subtree(cs.subtree_id,
                                           cs.extracted_seq + 1, through_seq);
  // Optimistic extraction replicates a coalesced rewrite framed as one
  // atomic batch; pessimistic extraction is the raw per-op slice.
  if (mode_ == Mode::Optimistic && w_.cfg.coalesce_enabled &&
      !entries.empty()) {
    uint64_t before = 0, after = 0;
    for (const auto& e : entries) before += e.payload.size();
    entries = log::coalesce(entries);
    for (const auto& e : entries) after += e.payload.size();
    w_.metrics.add("coalesce_bytes_saved", before - after);
    uint64_t batch_txn = log_->next_txn();
    for (size_t i = 0; i < entries.size(); i++) {
      entries[i].txn = batch_txn;
      entries[i].flags = i + 1 == entries.size() ? log::kFlagTxnLast : 0;
    }
  }
  // Mirror rings use their own dense sequence space: coalescing leaves
  // gaps in log seqs, and the ring scan requires contiguity.
  for (auto& e : entries) e.seq = ++cs.mirror_seq;

  ChainSession::Frame frame;
  frame.covers_from = cs.extracted_seq + 1;
  frame.covers_to = through_seq;
  frame.first_mirror_seq = entries.empty() ? cs.mirror_seq + 1
                                           : entries.front().seq;
  uint64_t data_cap = log_->capacity();
  for (const auto& e : entries) {
    Bytes enc = log::encode_entry(e);
    uint64_t space = data_cap - cs.ring_tail;
    if (space < enc.size()) {
      if (space >= 8) {
        Bytes sentinel;
        ByteWriter sw(sentinel);
        sw.u32(log::kWrapMagic);
        sw.u32(static_cast<uint32_t>(e.seq));
        frame.writes.emplace_back(cs.ring_tail, std::move(sentinel));
      }
      cs.ring_tail = 0;
    }
    frame.writes.emplace_back(cs.ring_tail, enc);
    cs.ring_tail += enc.size();
    if (cs.ring_tail == data_cap) cs.ring_tail = 0;
  }
  cs.extracted_seq = through_seq;
  cs.pending.push_back(std::move(frame));
}

sim::Co<Result<Unit>> LibFs::ensure_mirrors(
    ChainSession& cs, const std::vector<std::string>& targets) {
  uint64_t inc = inc_;
  bool stale = false;
  for (const auto& t : targets) {
    auto* tk = w_.kernfs_by_id(t);
    if (!tk) co_return Err::ReplicaFailed;
    uint64_t tinc = w_.node_incarnation(tk->node());
    auto mit = cs.mirrors.find(t);
    if (mit == cs.mirrors.end() || mit->second.node_incarnation != tinc) {
      stale = true;
    }
  }
  if (stale) {
    // A returning member needs everything the chain has not digested yet;
    // everything older reaches it through rejoin invalidation. Restart the
    // whole session on a fresh ring so every mirror sees one stream.
    cs.mirrors.clear();
    cs.pending.clear();
    cs.ring_tail = 0;
    cs.mirror_seq = 0;
    cs.extracted_seq = log_->digested_seq();
    cs.acked_seq = std::min(cs.acked_seq, cs.extracted_seq);
  }
  for (const auto& t : targets) {
    if (cs.mirrors.count(t)) continue;
    auto* tk = w_.kernfs_by_id(t);
    if (!tk) co_return Err::ReplicaFailed;
    uint64_t tinc = w_.node_incarnation(tk->node());
    uint64_t ring_off = cs.ring_tail;
    uint64_t mirror_base = cs.mirror_seq;
    if (!cs.pending.empty()) {
      if (!cs.pending.front().writes.empty()) {
        ring_off = cs.pending.front().writes.front().first;
      }
      mirror_base = cs.pending.front().first_mirror_seq - 1;
    }
    auto region = co_await open_mirror(t, cs.subtree_id, true, mirror_base,
                                       ring_off);
    if (!alive(inc)) co_return Err::DstFailed;
    if (!region.ok()) co_return region.error();
    cs.mirrors[t] = ChainSession::MirrorRef{*region, tinc};
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::replicate_subtree(ChainSession& cs,
                                               uint64_t through_seq) {
  uint64_t inc = inc_;
  for (int attempt = 0; attempt < kChainRetries; attempt++) {
    std::vector<std::string> targets = chain_targets(cs.subtree_id);
    if (targets.empty()) {
      const auto& st = w_.cluster().chain(cs.subtree_id);
      if (st.unavailable) co_return Err::ChainUnavailable;
      // Single-replica chain colocated with this process: local
      // persistence is the whole story.
      extract_frame(cs, through_seq);
      cs.pending.clear();
      cs.acked_seq = std::max(cs.acked_seq, cs.extracted_seq);
      refresh_replicated_watermark();
      co_return Unit{};
    }
    auto mirrors_ok = co_await ensure_mirrors(cs, targets);
    if (!alive(inc)) co_return Err::DstFailed;
    if (!mirrors_ok.ok()) {
      w_.metrics.add("chain_retries");
      co_await sim::sleep_for(w_.loop, 100 * sim::kMsec);
      if (!alive(inc)) co_return Err::DstFailed;
      continue;
    }
    extract_frame(cs, through_seq);
    auto flushed = co_await flush_pending(cs);
    if (!alive(inc)) co_return Err::DstFailed;
    if (flushed.ok() && cs.acked_seq >= through_seq) co_return Unit{};
    if (flushed.ok()) continue;  // session was reset mid-way; re-extract
    w_.metrics.add("chain_retries");
    co_await sim::sleep_for(w_.loop, 100 * sim::kMsec);
    if (!alive(inc)) co_return Err::DstFailed;
  }
  co_return Err::ReplicaFailed;
}

sim::Co<Result<Unit>> LibFs::flush_pending(ChainSession& cs) {
  uint64_t inc = inc_;
  while (!cs.pending.empty()) {
    std::vector<std::string> targets = chain_targets(cs.subtree_id);
    if (targets.empty()) {
      cs.pending.clear();
      cs.acked_seq = std::max(cs.acked_seq, cs.extracted_seq);
      refresh_replicated_watermark();
      co_return Unit{};
    }
    for (const auto& t : targets) {
      if (!cs.mirrors.count(t)) co_return Unit{};  // membership changed
    }
    ChainSession::Frame& f = cs.pending.front();
    const std::string& head = targets.front();
    for (const auto& [off, bytes] : f.writes) {
      w_.net.rdma_write(ep_, head, cs.mirrors.at(head).region,
                        log::kLogSuperblockSize + off, bytes,
                        "SEGMENT_WRITE");
    }
    proto::ChainStep step;
    step.log_owner = owner_string();
    step.subtree_id = cs.subtree_id;
    step.covers_from = f.covers_from;
    step.covers_to = f.covers_to;
    step.uid = cred_.uid;
    step.gid = cred_.gid;
    for (const auto& [off, bytes] : f.writes) {
      step.writes.emplace_back(off, bytes.size());
    }
    for (size_t i = 1; i < targets.size(); i++) {
      step.rest.emplace_back(targets[i], cs.mirrors.at(targets[i]).region);
    }
    auto ack = co_await w_.net.rpc(ep_, head, "CHAIN_STEP", step.encode());
    if (!alive(inc)) co_return Err::DstFailed;
    if (!ack.ok()) co_return ack.error();
    cs.acked_seq = f.covers_to;
    uint64_t bytes = 0;
    for (const auto& [off, b] : f.writes) bytes += b.size();
    w_.metrics.add("acked_durable_bytes", bytes * targets.size());
    cs.pending.erase(cs.pending.begin());
    refresh_replicated_watermark();
    if (w_.ack_hook) w_.ack_hook(name_, inc_, cs.acked_seq);
  }
  cs.acked_seq = std::max(cs.acked_seq, cs.extracted_seq);
  refresh_replicated_watermark();
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::replicate_all(uint64_t through_seq,
                                           bool for_sync) {
  (void)for_sync;
  uint64_t inc = inc_;
  auto guard = co_await repl_mutex_.lock();
  if (!alive(inc)) co_return Err::DstFailed;
  // Sessions for every subtree with entries in range.
  std::set<uint32_t> subtrees;
  for (const auto& e : log_->entries(1, through_seq)) subtrees.insert(e.subtree);
  for (uint32_t s : subtrees) {
    auto cs = co_await chain_session(s);
    if (!cs.ok()) co_return cs.error();
  }
  for (auto& [id, cs] : chains_) {
    auto r = co_await replicate_subtree(cs, through_seq);
    if (!alive(inc)) co_return Err::DstFailed;
    if (!r.ok()) co_return r.error();
  }
  refresh_replicated_watermark();
  if (log_->replicated_seq() < through_seq) {
    log_->set_replicated_seq(through_seq);
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::evict_private_cache() {
  uint64_t inc = inc_;
  if (digest_in_progress_) {
    auto done = digest_done_;
    co_await done;
    co_return Unit{};
  }
  digest_in_progress_ = true;
  digest_done_ = sim::Future<Unit>{};
  digests_++;
  w_.metrics.add("libfs_digests");

  uint64_t thru = log_->tail_seq();
  auto finish = [&](Result<Unit> r) {
    digest_in_progress_ = false;
    digest_done_.try_fulfill(Unit{});
    return r;
  };

  if (thru == log_->digested_seq()) co_return finish(Unit{});

  auto rep = co_await replicate_all(thru, false);
  if (!alive(inc)) co_return finish(Err::DstFailed);
  if (!rep.ok()) co_return finish(rep.error());

  // Parallel digests: local kernfs over the original log, every chain
  // replica (and reserve) over its mirror.
  std::vector<sim::Future<Result<Bytes>>> acks;
  bool local_member = false;
  std::set<uint32_t> subtrees;
  for (const auto& e : log_->entries(1, thru)) subtrees.insert(e.subtree);
  for (uint32_t s : subtrees) {
    const auto* chain = w_.cfg.chain_for_subtree(s);
    if (chain && w_.cfg.node_in_chain(node_, *chain)) local_member = true;
  }
  if (local_member) {
    proto::LocalDigestReq req;
    req.log_owner = owner_string();
    req.log_region = log_->region();
    req.from_seq = log_->digested_seq() + 1;
    req.through_seq = thru;
    req.uid = cred_.uid;
    req.gid = cred_.gid;
    acks.push_back(w_.net.rpc(ep_, local_kernfs(), "DIGEST", req.encode()));
  }
  for (auto& [sid, cs] : chains_) {
    for (const auto& [target, region] : cs.mirrors) {
      auto* kf = w_.kernfs_by_id(target);
      if (!kf || !w_.node_alive(kf->node())) continue;
      proto::EvictReq req;
      req.log_owner = owner_string();
      req.subtree_id = sid;
      req.through_seq = std::min(thru, cs.acked_seq);
      req.uid = cred_.uid;
      req.gid = cred_.gid;
      acks.push_back(w_.net.rpc(ep_, target, "EVICT", req.encode()));
    }
  }
  for (size_t i = 0; i < acks.size(); i++) {
    sim::Future<Result<Bytes>> f = acks[i];
    auto r = co_await f;
    if (!alive(inc)) co_return finish(Err::DstFailed);
    if (!r.ok() && r.error() != Err::DstFailed && r.error() != Err::Timeout) {
      co_return finish(r.error());
    }
    // A replica that died mid-eviction reconverges through the rejoin
    // protocol; the survivors' digests carry the chain.
  }
  log_->advance_head(thru);
  co_return finish(Unit{});
}

// --- resize ---------------------------------------------------------------------

uint64_t LibFs::next_log_size() const {
  uint64_t cur = log_->capacity() + log::kLogSuperblockSize;
  if (cur < w_.cfg.resize_multiplicative_threshold) return cur * 2;
  return cur + w_.cfg.resize_increment;
}

sim::Co<Result<Unit>> LibFs::resize_log(uint64_t new_capacity) {
  uint64_t inc = inc_;
  auto guard = co_await repl_mutex_.lock();
  if (!alive(inc)) co_return Err::DstFailed;
  // Resizes happen at digest boundaries: nothing live in the ring.
  if (log_->digested_seq() != log_->tail_seq()) {
    auto ev = co_await evict_private_cache();
    if (!ev.ok()) co_return ev.error();
    if (!alive(inc)) co_return Err::DstFailed;
    if (log_->digested_seq() != log_->tail_seq()) co_return Err::EINVAL_;
  }
  uint64_t base_seq = log_->tail_seq();

  // Every mirror of this log, across all chains, must agree on the size.
  std::set<std::string> participants;
  for (const auto& [sid, cs] : chains_) {
    for (const auto& [t, r] : cs.mirrors) participants.insert(t);
  }

  proto::ResizeReq req;
  req.log_owner = owner_string();
  req.new_capacity = new_capacity;
  req.base_seq = base_seq;

  // Phase 1: reserve.
  std::vector<std::string> reserved;
  bool all_ok = true;
  for (const auto& t : participants) {
    for (const auto& [sid, cs] : chains_) {
      if (!cs.mirrors.count(t)) continue;
      proto::ResizeReq r1 = req;
      r1.subtree_id = sid;
      auto rep = co_await w_.net.rpc(ep_, t, "RESIZE_RESERVE", r1.encode());
      if (!alive(inc)) co_return Err::DstFailed;
      if (!rep.ok()) {
        all_ok = false;
        break;
      }
      reserved.push_back(t);
      break;  // one reservation per participant
    }
    if (!all_ok) break;
  }
  if (!all_ok) {
    // Abort: release reservations; sizes stay identical everywhere.
    for (const auto& t : reserved) {
      for (const auto& [sid, cs] : chains_) {
        if (!cs.mirrors.count(t)) continue;
        proto::ResizeReq r1 = req;
        r1.subtree_id = sid;
        co_await w_.net.rpc(ep_, t, "RESIZE_ABORT", r1.encode());
        if (!alive(inc)) co_return Err::DstFailed;
        break;
      }
    }
    w_.metrics.add("resize_aborts");
    co_return Err::ReplicaOutOfMemory;
  }

  // Phase 2: commit everywhere, then locally.
  for (const auto& t : participants) {
    for (auto& [sid, cs] : chains_) {
      if (!cs.mirrors.count(t)) continue;
      proto::ResizeReq r1 = req;
      r1.subtree_id = sid;
      auto rep = co_await w_.net.rpc(ep_, t, "RESIZE_COMMIT", r1.encode());
      if (!alive(inc)) co_return Err::DstFailed;
      if (!rep.ok()) co_return rep.error();
      break;
    }
  }
  auto st = w_.media.resize_region(log_->region(), new_capacity);
  if (!st.ok()) co_return st.error();
  log_ = std::make_unique<log::UpdateLog>(w_.loop, w_.media, log_->region(),
                                          ep_, (proc_index_ << 8) | inc_);
  log_->format();
  for (auto& [sid, cs] : chains_) {
    cs.ring_tail = 0;
    cs.extracted_seq = base_seq;
    cs.acked_seq = base_seq;
    cs.pending.clear();
  }
  (void)base_seq;
  w_.metrics.add("resizes");
  co_return Unit{};
}

// --- read path --------------------------------------------------------------------

void LibFs::invalidate_mapping(InodeNum ino) { mapping_.erase(ino); }

sim::Co<Result<LibFs::ReadResult>> LibFs::read_range(const std::string& path,
                                                     InodeNum ino,
                                                     uint64_t off,
                                                     uint64_t len) {
  uint64_t inc = inc_;
  ViewPtr v = view(ino);
  if (!v) co_return Err::EBADF_;
  uint64_t end = std::min(off + len, v->size);
  ReadResult out;
  out.provenance = ReadTier::PrivateLog;
  if (off >= end) co_return out;
  out.data.assign(end - off, 0);
  uint8_t worst = 0;
  auto note = [&](ReadTier t) {
    worst = std::max(worst, static_cast<uint8_t>(t));
    w_.metrics.add(std::string("prov_") + read_tier_name(t));
  };

  // 1. Private update log via the log hashtable.
  IntervalSet covered;
  for (const auto& hit : log_->index().lookup(ino, off, end)) {
    auto bytes =
        w_.media.read(log_->region(), hit.payload_region_off, hit.end - hit.begin);
    CFS_ASSERT(bytes.ok());
    std::copy(bytes->begin(), bytes->end(), out.data.begin() + (hit.begin - off));
    covered.add(hit.begin, hit.end);
    note(ReadTier::PrivateLog);
  }
  if (covered.contains(off, end)) {
    co_await sim::sleep_for(w_.loop,
                            w_.cfg.latency.nvm_local_read);
    out.provenance = static_cast<ReadTier>(worst);
    co_return out;
  }

  // 2. DRAM read cache, block by block.
  for (auto [gb, ge] : covered.uncovered(off, end)) {
    for (uint64_t b = gb / ReadCache::kBlock; b * ReadCache::kBlock < ge; b++) {
      Bytes block;
      if (!rcache_->lookup(ino, b, &block)) continue;
      uint64_t bb = std::max(gb, b * ReadCache::kBlock);
      uint64_t be = std::min(ge, (b + 1) * ReadCache::kBlock);
      std::copy(block.begin() + (bb - b * ReadCache::kBlock),
                block.begin() + (be - b * ReadCache::kBlock),
                out.data.begin() + (bb - off));
      covered.add(bb, be);
      note(ReadTier::DramCache);
    }
  }

  uint32_t subtree = v->subtree;
  const auto* chain = w_.cfg.chain_for_subtree(subtree);
  bool member = chain && w_.cfg.node_in_chain(node_, *chain);
  std::string reserve = w_.cluster().reserve_kernfs(subtree);

  // 3. Local kernfs hot shared area through the read-only mapping analog.
  if (member && !covered.contains(off, end)) {
    auto snap = mapping_.find(ino);
    if (snap == mapping_.end()) {
      auto fresh = w_.kernfs_on(node_)->snapshot_extents(ino, cred_);
      // Consulting the kernfs for the mapping costs a kernel crossing.
      co_await sim::sleep_for(w_.loop, w_.cfg.latency.nvm_kernel_read);
      if (!alive(inc)) co_return Err::DstFailed;
      if (fresh.ok()) {
        mapping_[ino] = *fresh;
        snap = mapping_.find(ino);
      } else if (fresh.error() == Err::EACCES_) {
        co_return Err::EACCES_;
      }
    }
    if (snap != mapping_.end()) {
      for (auto [gb, ge] : covered.uncovered(off, end)) {
        for (const auto& ext : snap->second) {
          uint64_t b = std::max(gb, ext.begin);
          uint64_t e = std::min(ge, ext.end);
          if (b >= e) continue;
          if (ext.tier == kernfs::PlaceTier::HotNvm) {
            auto bytes = w_.media.read(
                ext.region, ext.region_off + (b - ext.begin), e - b);
            CFS_ASSERT(bytes.ok());
            std::copy(bytes->begin(), bytes->end(), out.data.begin() + (b - off));
            covered.add(b, e);
            note(ReadTier::LocalHotNvm);
            co_await sim::sleep_for(w_.loop, w_.cfg.latency.nvm_local_read);
            if (!alive(inc)) co_return Err::DstFailed;
          }
        }
      }
      // Cold extents: prefer the reserve replica's NVM over local SSD.
      for (auto [gb, ge] : covered.uncovered(off, end)) {
        for (const auto& ext : snap->second) {
          uint64_t b = std::max(gb, ext.begin);
          uint64_t e = std::min(ge, ext.end);
          if (b >= e) continue;
          if (ext.tier != kernfs::PlaceTier::ColdSsd &&
              ext.tier != kernfs::PlaceTier::HotSsd) {
            continue;
          }
          bool served = false;
          if (!reserve.empty()) {
            auto got = co_await fetch_remote(reserve, ino, b, e - b,
                                             ReadTier::ReserveNvm, &out, off);
            if (!alive(inc)) co_return Err::DstFailed;
            if (got.ok() && *got) {
              covered.add(b, e);
              note(ReadTier::ReserveNvm);
              served = true;
            }
          }
          if (!served) {
            // Local cold SSD read, cached in DRAM with sequential prefetch.
            auto* k = w_.kernfs_on(node_);
            auto hits = k->area().read(ino, b, e - b);
            co_await sim::sleep_for(w_.loop, w_.cfg.latency.ssd_read);
            if (!alive(inc)) co_return Err::DstFailed;
            for (auto& h : hits) {
              std::copy(h.data.begin(), h.data.end(),
                        out.data.begin() + (h.begin - off));
              // A promoted reserve replica warms its NVM on access.
              if (h.tier == kernfs::PlaceTier::HotSsd) {
                k->area().repopulate(ino, h.begin, h.data);
              }
            }
            covered.add(b, e);
            note(ReadTier::LocalSsd);
            co_await cache_fill_from_area(ino, b, e, v->size);
            if (!alive(inc)) co_return Err::DstFailed;
          }
        }
      }
    }
  }

  // 4. Remote cache replica (non-member nodes, or invalidated local data).
  if (!covered.contains(off, end)) {
    std::string server;
    auto reps = w_.cluster().replica_kernfs(subtree);
    for (const auto& r : reps) {
      auto* kf = w_.kernfs_by_id(r);
      if (kf && kf->node() != node_) {
        server = r;
        break;
      }
    }
    if (server.empty() && !reserve.empty()) server = reserve;
    for (auto [gb, ge] : covered.uncovered(off, end)) {
      if (server.empty()) break;
      auto got = co_await fetch_remote(server, ino, gb, ge - gb,
                                       ReadTier::RemoteNvm, &out, off);
      if (!alive(inc)) co_return Err::DstFailed;
      if (got.ok() && *got) {
        covered.add(gb, ge);
        note(ReadTier::RemoteNvm);
        // Post-rejoin repopulation: refresh the local copy on access.
        if (member) {
          auto* k = w_.kernfs_on(node_);
          if (k->area().pending_invalidation(ino)) {
            Bytes chunk(out.data.begin() + (gb - off),
                        out.data.begin() + (ge - off));
            k->area().repopulate(ino, gb, chunk);
          }
        }
      }
    }
  }

  // Anything still uncovered inside the size is a sparse hole: zeroes.
  out.provenance = static_cast<ReadTier>(worst);
  co_return out;
}

// Fetches [b, b+len) of ino from `server` straight into the DRAM cache and
// copies it into `out`. Returns false when the server does not have it.
sim::Co<Result<bool>> LibFs::fetch_remote(const std::string& server,
                                          InodeNum ino, uint64_t b,
                                          uint64_t len, ReadTier tier,
                                          ReadResult* out, uint64_t out_base) {
  (void)tier;
  uint64_t inc = inc_;
  uint64_t first_block = b / ReadCache::kBlock;
  uint64_t last_block = (b + len - 1) / ReadCache::kBlock;
  for (uint64_t blk = first_block; blk <= last_block; blk++) {
    uint64_t blk_base = blk * ReadCache::kBlock;
    Bytes cached;
    if (rcache_->lookup(ino, blk, &cached)) {
      uint64_t cb = std::max(b, blk_base);
      uint64_t ce = std::min(b + len, blk_base + ReadCache::kBlock);
      std::copy(cached.begin() + (cb - blk_base),
                cached.begin() + (ce - blk_base),
                out->data.begin() + (cb - out_base));
      continue;
    }
    proto::ReadReq req;
    req.ino = ino;
    req.off = blk_base;
    req.len = ReadCache::kBlock;
    req.uid = cred_.uid;
    req.gid = cred_.gid;
    // Requested bytes land first; the rest of the block follows as
    // prefetch on the same connection.
    uint64_t want_end = std::min(b + len, blk_base + ReadCache::kBlock);
    uint64_t first_len = want_end - blk_base;
    auto slot = rcache_->prepare(ino, blk);
    if (slot.evicted) {
      co_await writeback_if_dirty(*slot.evicted);
    }
    if (!alive(inc)) co_return Err::DstFailed;
    uint64_t slot_idx = slot.offset / ReadCache::kBlock;
    rcache_->pin_slot(slot_idx);
    sim::Future<Result<media::WriteTicket>> trailer;
    auto got = co_await w_.net.read_into_requester_cache(
        ep_, server, "REMOTE_READ", req.encode(), rcache_->region(),
        slot.offset, first_len, &trailer);
    // The slot stays pinned until the block's prefetch trailer landed.
    ReadCache* cache = rcache_.get();
    trailer.on_ready([cache, slot_idx](const Result<media::WriteTicket>&) {
      cache->unpin_slot(slot_idx);
    });
    if (!alive(inc)) co_return Err::DstFailed;
    if (!got.ok()) {
      rcache_->abandon(ino, blk);
      co_return false;
    }
    rcache_->confirm(ino, blk);
    w_.metrics.add("remote_reads");
    Bytes block;
    CFS_ASSERT(rcache_->lookup(ino, blk, &block));
    uint64_t cb = std::max(b, blk_base);
    uint64_t ce = want_end;
    std::copy(block.begin() + (cb - blk_base), block.begin() + (ce - blk_base),
              out->data.begin() + (cb - out_base));
  }
  co_return true;
}

sim::Co<Result<Unit>> LibFs::cache_fill_from_area(InodeNum ino, uint64_t b,
                                                  uint64_t e, uint64_t size) {
  // 256KB sequential prefetch from cold storage into the DRAM cache.
  uint64_t inc = inc_;
  uint64_t prefetch_end = std::min(size, b + (256u << 10));
  prefetch_end = std::max(prefetch_end, e);
  auto* k = w_.kernfs_on(node_);
  for (uint64_t blk = b / ReadCache::kBlock;
       blk * ReadCache::kBlock < prefetch_end; blk++) {
    if (rcache_->cached(ino, blk)) continue;
    uint64_t base = blk * ReadCache::kBlock;
    auto hits = k->area().read(ino, base, ReadCache::kBlock);
    Bytes block(ReadCache::kBlock, 0);
    bool any = false;
    for (auto& h : hits) {
      std::copy(h.data.begin(), h.data.end(), block.begin() + (h.begin - base));
      any = true;
    }
    if (!any) break;
    auto victim = rcache_->fill(ino, blk, block, false);
    if (victim) co_await writeback_if_dirty(*victim);
    if (!alive(inc)) co_return Err::DstFailed;
  }
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::writeback_if_dirty(ReadCache::Evicted ev) {
  if (!ev.dirty) co_return Unit{};
  // Dirty cache data whose covering log entries were already digested is
  // written back through the update log before the block is dropped.
  uint64_t base = ev.block * ReadCache::kBlock;
  auto hits = log_->index().lookup(ev.ino, base, base + ReadCache::kBlock);
  IntervalSet covered;
  for (const auto& h : hits) covered.add(h.begin, h.end);
  if (covered.contains(base, base + ReadCache::kBlock)) co_return Unit{};
  ViewPtr v = view(ev.ino);
  uint64_t end = v ? std::min(v->size, base + ReadCache::kBlock)
                   : base + ReadCache::kBlock;
  if (end <= base) co_return Unit{};
  Bytes data(ev.data.begin(), ev.data.begin() + (end - base));
  uint32_t subtree = v ? v->subtree : 0;
  w_.metrics.add("rcache_writebacks");
  auto r = co_await append_entry(OpKind::Write, ev.ino, base, std::move(data),
                                 subtree);
  if (!r.ok()) co_return r.error();
  co_return Unit{};
}

// --- POSIX surface -----------------------------------------------------------------

sim::Co<Result<int>> LibFs::open(std::string path, uint32_t flags,
                                 uint32_t mode) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!path_valid(path)) co_return Err::EINVAL_;
  bool want_write = flags & O_WR;
  std::string dir = parent_path(path);

  // Scope order is always parent before child, matching every other
  // multi-scope operation.
  LeasePtr dir_lease;
  if (flags & O_CREAT_) {
    auto dl = co_await acquire(dir, false, true);
    if (!alive(inc)) co_return Err::DstFailed;
    if (!dl.ok()) co_return dl.error();
    dir_lease = *dl;
    lease_usage(dir_lease->id, 1);
  }
  auto file_lease = co_await acquire(path, false, want_write);
  if (!alive(inc)) {
    if (dir_lease) lease_usage_[dir_lease->id]--;
    co_return Err::DstFailed;
  }
  if (!file_lease.ok()) {
    if (dir_lease) lease_usage_[dir_lease->id]--;
    co_return file_lease.error();
  }
  lease_usage((*file_lease)->id, 1);
  auto done = [&](Result<int> r) {
    if (dir_lease) lease_usage_[dir_lease->id]--;
    lease_usage_[(*file_lease)->id]--;
    return r;
  };

  // Holding the lease guarantees conflicting writers have evicted; the
  // digested state is now authoritative for resolution.
  auto parent_ino = co_await resolve(path, /*want_parent=*/true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!parent_ino.ok()) co_return done(parent_ino.error());
  auto existing = co_await resolve(path, false);
  if (!alive(inc)) co_return done(Err::DstFailed);

  InodeNum ino = 0;
  if (!existing.ok()) {
    if (existing.error() != Err::ENOENT_ || !(flags & O_CREAT_)) {
      co_return done(existing.error());
    }
    auto pv = co_await fault_in(dir, *parent_ino, true);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (!pv.ok()) co_return done(pv.error());
    if ((*pv)->kind != FileKind::Dir) co_return done(Err::ENOTDIR_);
    if (!can_access((*pv)->attrs, cred_, true)) co_return done(Err::EACCES_);
    if ((*pv)->dirents.count(base_name(path))) {
      if (flags & O_EXCL_) co_return done(Err::EEXIST_);
      ino = (*pv)->dirents.at(base_name(path));
    } else {
      ino = alloc_ino();
      uint32_t subtree = w_.cfg.subtree_of(path);
      LogEntry::CreateArgs args{*parent_ino, Attrs{mode, cred_.uid, cred_.gid},
                                base_name(path)};
      Bytes cpayload = LogEntry::pack_create(args);
      auto seq = co_await append_entry(OpKind::Create, ino, 0,
                                       std::move(cpayload), subtree);
      if (!alive(inc)) co_return done(Err::DstFailed);
      if (!seq.ok()) co_return done(seq.error());
      (*pv)->dirents[base_name(path)] = ino;
      auto vn = std::make_shared<ViewNode>();
      vn->kind = FileKind::File;
      vn->attrs = args.attrs;
      vn->size = 0;
      vn->mtime = now_mtime();
      vn->subtree = subtree;
      vn->have_dirents = true;
      view_[ino] = vn;
      path_cache_[path] = ino;
    }
  } else {
    ino = *existing;
    if ((flags & O_CREAT_) && (flags & O_EXCL_)) co_return done(Err::EEXIST_);
  }

  auto v = co_await fault_in(path, ino, false);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!v.ok()) co_return done(v.error());
  if ((*v)->kind == FileKind::Dir && want_write) co_return done(Err::EISDIR_);
  if (!can_access((*v)->attrs, cred_, want_write)) co_return done(Err::EACCES_);

  if ((flags & O_TRUNC_) && want_write && (*v)->size > 0) {
    Bytes tpayload;
    auto seq = co_await append_entry(OpKind::Truncate, ino, 0,
                                     std::move(tpayload), (*v)->subtree);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (!seq.ok()) co_return done(seq.error());
    (*v)->size = 0;
    (*v)->mtime = now_mtime();
    rcache_->invalidate_inode(ino);
  }

  int fd = next_fd_++;
  fds_[fd] = FileHandle{path, ino, flags, 0};
  co_return done(fd);
}

sim::Co<Result<Unit>> LibFs::close(int fd) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) co_return Err::EBADF_;
  // Closing invalidates this file's cached blocks and mapping.
  rcache_->invalidate_inode(it->second.ino);
  mapping_.erase(it->second.ino);
  fds_.erase(it);
  co_return Unit{};
}

Result<Unit> LibFs::seek(int fd, uint64_t off) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) return Err::EBADF_;
  it->second.cursor = off;
  return Unit{};
}

sim::Co<Result<LibFs::ReadResult>> LibFs::pread(int fd, uint64_t off,
                                                uint64_t len) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  auto it = fds_.find(fd);
  if (it == fds_.end()) co_return Err::EBADF_;
  FileHandle fh = it->second;

  auto lease = co_await acquire(fh.path, false, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();
  lease_usage((*lease)->id, 1);
  uint64_t lease_id = (*lease)->id;

  if (!view(fh.ino)) {
    auto v = co_await fault_in(fh.path, fh.ino, false);
    if (!alive(inc)) {
      lease_usage_[lease_id]--;
      co_return Err::DstFailed;
    }
    if (!v.ok()) {
      lease_usage_[lease_id]--;
      co_return v.error();
    }
  }
  auto r = co_await read_range(fh.path, fh.ino, off, len);
  if (alive(inc)) lease_usage_[lease_id]--;
  co_return r;
}

sim::Co<Result<LibFs::ReadResult>> LibFs::read(int fd, uint64_t len) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) co_return Err::EBADF_;
  uint64_t off = it->second.cursor;
  auto r = co_await pread(fd, off, len);
  if (r.ok()) {
    auto again = fds_.find(fd);
    if (again != fds_.end()) again->second.cursor = off + r->data.size();
  }
  co_return r;
}

sim::Co<Result<uint64_t>> LibFs::pwrite(int fd, uint64_t off, Bytes data) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  auto it = fds_.find(fd);
  if (it == fds_.end()) co_return Err::EBADF_;
  if (!(it->second.flags & O_WR)) co_return Err::EBADF_;
  FileHandle fh = it->second;

  auto lease = co_await acquire(fh.path, false, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();
  lease_usage((*lease)->id, 1);
  uint64_t lease_id = (*lease)->id;
  auto done = [&](Result<uint64_t> r) {
    lease_usage_[lease_id]--;
    return r;
  };

  ViewPtr v = view(fh.ino);
  if (!v) {
    auto fv = co_await fault_in(fh.path, fh.ino, false);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (!fv.ok()) co_return done(fv.error());
    v = *fv;
  }
  if (v->kind == FileKind::Dir) co_return done(Err::EISDIR_);

  uint64_t written = 0;
  while (written < data.size()) {
    uint64_t n = std::min<uint64_t>(kMaxEntryPayload, data.size() - written);
    Bytes chunk(data.begin() + written, data.begin() + written + n);
    auto seq = co_await append_entry(OpKind::Write, fh.ino, off + written,
                                     std::move(chunk), v->subtree);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (!seq.ok()) co_return done(seq.error());
    written += n;
  }
  v = view(fh.ino);
  if (v) {
    v->size = std::max(v->size, off + data.size());
    v->mtime = now_mtime();
  }
  rcache_->update(fh.ino, off, data);
  w_.metrics.add("bytes_written", data.size());
  co_return done(written);
}

sim::Co<Result<uint64_t>> LibFs::write(int fd, Bytes data) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) co_return Err::EBADF_;
  uint64_t off = it->second.cursor;
  uint64_t n = data.size();
  auto r = co_await pwrite(fd, off, std::move(data));
  if (r.ok()) {
    auto again = fds_.find(fd);
    if (again != fds_.end()) again->second.cursor = off + n;
  }
  co_return r;
}

sim::Co<Result<Unit>> LibFs::fsync(int fd) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!fds_.count(fd)) co_return Err::EBADF_;
  if (mode_ == Mode::Optimistic) co_return Unit{};  // fsync is a no-op
  uint64_t thru = log_->tail_seq();
  auto r = co_await replicate_all(thru, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!r.ok()) co_return r.error();
  co_await sim::sleep_until(w_.loop, log_->last_append_deadline());
  if (!alive(inc)) co_return Err::DstFailed;
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::dsync(int fd) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!fds_.count(fd)) co_return Err::EBADF_;
  uint64_t thru = log_->tail_seq();
  auto r = co_await replicate_all(thru, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!r.ok()) co_return r.error();
  co_await sim::sleep_until(w_.loop, log_->last_append_deadline());
  if (!alive(inc)) co_return Err::DstFailed;
  co_return Unit{};
}

sim::Co<Result<Unit>> LibFs::mkdir(std::string path, uint32_t mode) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!path_valid(path) || path == "/") co_return Err::EINVAL_;
  uint32_t subtree = w_.cfg.subtree_of(path);
  if (subtree == 0) co_return Err::ENOENT_;
  if (w_.cfg.chain_for_subtree(subtree)->root == path) co_return Err::EEXIST_;

  auto parent_ino = co_await resolve(path, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!parent_ino.ok()) co_return parent_ino.error();

  std::string dir = parent_path(path);
  auto lease = co_await acquire(dir, false, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();
  lease_usage((*lease)->id, 1);
  auto done = [&](Result<Unit> r) {
    lease_usage_[(*lease)->id]--;
    return r;
  };

  auto pv = co_await fault_in(dir, *parent_ino, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!pv.ok()) co_return done(pv.error());
  if ((*pv)->kind != FileKind::Dir) co_return done(Err::ENOTDIR_);
  if (!can_access((*pv)->attrs, cred_, true)) co_return done(Err::EACCES_);
  if ((*pv)->dirents.count(base_name(path))) co_return done(Err::EEXIST_);

  InodeNum ino = alloc_ino();
  LogEntry::CreateArgs args{*parent_ino, Attrs{mode, cred_.uid, cred_.gid},
                            base_name(path)};
  Bytes mpayload = LogEntry::pack_create(args);
  auto seq = co_await append_entry(OpKind::Mkdir, ino, 0, std::move(mpayload),
                                   subtree);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!seq.ok()) co_return done(seq.error());
  (*pv)->dirents[base_name(path)] = ino;
  auto vn = std::make_shared<ViewNode>();
  vn->kind = FileKind::Dir;
  vn->attrs = args.attrs;
  vn->mtime = now_mtime();
  vn->subtree = subtree;
  vn->have_dirents = true;
  view_[ino] = vn;
  path_cache_[path] = ino;
  co_return done(Unit{});
}

sim::Co<Result<Unit>> LibFs::unlink(std::string path) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!path_valid(path) || path == "/") co_return Err::EINVAL_;
  std::string dir = parent_path(path);

  // Ordered acquisition (directory and file scopes sorted) keeps
  // multi-scope operations deadlock free.
  std::vector<std::string> scopes{dir, path};
  std::sort(scopes.begin(), scopes.end());
  std::vector<uint64_t> held;
  for (const auto& s : scopes) {
    auto lease = co_await acquire(s, false, true);
    if (!alive(inc)) co_return Err::DstFailed;
    if (!lease.ok()) {
      for (uint64_t id : held) lease_usage_[id]--;
      co_return lease.error();
    }
    lease_usage((*lease)->id, 1);
    held.push_back((*lease)->id);
  }
  auto done = [&](Result<Unit> r) {
    for (uint64_t id : held) lease_usage_[id]--;
    return r;
  };

  auto parent_ino = co_await resolve(path, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!parent_ino.ok()) co_return done(parent_ino.error());
  auto pv = co_await fault_in(dir, *parent_ino, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!pv.ok()) co_return done(pv.error());
  auto d = (*pv)->dirents.find(base_name(path));
  if (d == (*pv)->dirents.end()) co_return done(Err::ENOENT_);
  InodeNum ino = d->second;
  if (!can_access((*pv)->attrs, cred_, true)) co_return done(Err::EACCES_);

  auto tv = co_await fault_in(path, ino, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!tv.ok()) co_return done(tv.error());
  if ((*tv)->kind == FileKind::Dir && !(*tv)->dirents.empty()) {
    co_return done(Err::ENOTEMPTY_);
  }
  uint32_t subtree = (*tv)->subtree;

  LogEntry::UnlinkArgs uargs{*parent_ino, base_name(path)};
  Bytes upayload = LogEntry::pack_unlink(uargs);
  auto seq = co_await append_entry(OpKind::Unlink, ino, 0,
                                   std::move(upayload), subtree);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!seq.ok()) co_return done(seq.error());

  (*pv)->dirents.erase(base_name(path));
  view_.erase(ino);
  path_cache_.erase(path);
  mapping_.erase(ino);
  rcache_->invalidate_inode(ino);
  co_return done(Unit{});
}

sim::Co<Result<Unit>> LibFs::rename(std::string from, std::string to) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!path_valid(from) || !path_valid(to)) co_return Err::EINVAL_;
  if (from == to) co_return Unit{};
  if (w_.cfg.subtree_of(from) != w_.cfg.subtree_of(to)) co_return Err::EXDEV_;
  if (path_is_or_under(to, from)) co_return Err::EINVAL_;

  // Directory scopes first, then the file scopes, each set in sorted
  // order: parents always precede children lexicographically, so every
  // multi-scope operation acquires in one global order.
  std::set<std::string> dir_scopes{parent_path(from), parent_path(to)};
  std::vector<uint64_t> held;
  auto done = [&](Result<Unit> r) {
    for (uint64_t id : held) lease_usage_[id]--;
    return r;
  };
  for (const auto& s : dir_scopes) {
    auto lease = co_await acquire(s, false, true);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (!lease.ok()) co_return done(lease.error());
    lease_usage((*lease)->id, 1);
    held.push_back((*lease)->id);
  }

  auto src_parent = co_await resolve(from, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!src_parent.ok()) co_return done(src_parent.error());
  auto dst_parent = co_await resolve(to, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!dst_parent.ok()) co_return done(dst_parent.error());

  auto spv = co_await fault_in(parent_path(from), *src_parent, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!spv.ok()) co_return done(spv.error());
  auto dpv = co_await fault_in(parent_path(to), *dst_parent, true);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!dpv.ok()) co_return done(dpv.error());
  if ((*dpv)->kind != FileKind::Dir) co_return done(Err::ENOTDIR_);
  if (!can_access((*spv)->attrs, cred_, true) ||
      !can_access((*dpv)->attrs, cred_, true)) {
    co_return done(Err::EACCES_);
  }
  auto sd = (*spv)->dirents.find(base_name(from));
  if (sd == (*spv)->dirents.end()) co_return done(Err::ENOENT_);
  InodeNum ino = sd->second;

  // Both file scopes transfer with the rename: holders of the source path
  // would otherwise read through a stale binding, and readers of the
  // destination path must serialize against the file appearing there.
  std::set<std::string> file_scopes{from, to};
  for (const auto& scope : file_scopes) {
    auto fl = co_await acquire(scope, false, true);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (!fl.ok()) co_return done(fl.error());
    lease_usage((*fl)->id, 1);
    held.push_back((*fl)->id);
  }
  // Destination state is only authoritative under its lease.
  auto dd = (*dpv)->dirents.find(base_name(to));
  InodeNum replaced_ino = dd != (*dpv)->dirents.end() ? dd->second : 0;
  if (replaced_ino != 0) {
    auto rv = co_await fault_in(to, replaced_ino, true);
    if (!alive(inc)) co_return done(Err::DstFailed);
    if (rv.ok() && (*rv)->kind == FileKind::Dir && !(*rv)->dirents.empty()) {
      co_return done(Err::ENOTEMPTY_);
    }
  }

  uint32_t subtree = w_.cfg.subtree_of(from);
  LogEntry::RenameArgs args{*src_parent, *dst_parent, replaced_ino,
                            base_name(from), base_name(to)};
  Bytes rpayload = LogEntry::pack_rename(args);
  auto seq = co_await append_entry(OpKind::Rename, ino, 0,
                                   std::move(rpayload), subtree);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!seq.ok()) co_return done(seq.error());

  (*spv)->dirents.erase(base_name(from));
  (*dpv)->dirents[base_name(to)] = ino;
  if (replaced_ino) {
    view_.erase(replaced_ino);
    mapping_.erase(replaced_ino);
    rcache_->invalidate_inode(replaced_ino);
  }
  // Path bindings below a moved directory are stale.
  for (auto pit = path_cache_.begin(); pit != path_cache_.end();) {
    if (path_is_or_under(pit->first, from) || pit->first == to) {
      pit = path_cache_.erase(pit);
    } else {
      ++pit;
    }
  }
  path_cache_[to] = ino;
  co_return done(Unit{});
}

sim::Co<Result<std::vector<std::string>>> LibFs::readdir(std::string path) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!path_valid(path)) co_return Err::EINVAL_;
  if (path == "/") {
    std::vector<std::string> names;
    for (const auto& c : w_.cfg.chains) names.push_back(base_name(c.root));
    co_return names;
  }
  auto lease = co_await acquire(path, false, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();
  lease_usage((*lease)->id, 1);
  auto done = [&]<class T>(Result<T> r) {
    lease_usage_[(*lease)->id]--;
    return r;
  };

  auto ino = co_await resolve(path, false);
  if (!alive(inc)) co_return done(Result<std::vector<std::string>>(Err::DstFailed));
  if (!ino.ok()) co_return done(Result<std::vector<std::string>>(ino.error()));
  auto v = co_await fault_in(path, *ino, true);
  if (!alive(inc)) co_return done(Result<std::vector<std::string>>(Err::DstFailed));
  if (!v.ok()) co_return done(Result<std::vector<std::string>>(v.error()));
  if ((*v)->kind != FileKind::Dir) {
    co_return done(Result<std::vector<std::string>>(Err::ENOTDIR_));
  }
  std::vector<std::string> names;
  for (const auto& [name, child] : (*v)->dirents) names.push_back(name);
  co_return done(Result<std::vector<std::string>>(std::move(names)));
}

sim::Co<Result<LibFs::StatInfo>> LibFs::stat(std::string path) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  if (!path_valid(path)) co_return Err::EINVAL_;
  if (path == "/") co_return StatInfo{FileKind::Dir, 0, Attrs{0755, 0, 0}, 0};
  auto lease = co_await acquire(path, false, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();

  auto ino = co_await resolve(path, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!ino.ok()) co_return ino.error();
  auto v = co_await fault_in(path, *ino, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!v.ok()) co_return v.error();
  co_return StatInfo{(*v)->kind, (*v)->size, (*v)->attrs, (*v)->mtime};
}

sim::Co<Result<Unit>> LibFs::truncate(std::string path, uint64_t size) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  auto lease = co_await acquire(path, false, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();
  lease_usage((*lease)->id, 1);
  auto done = [&](Result<Unit> r) {
    lease_usage_[(*lease)->id]--;
    return r;
  };
  auto ino = co_await resolve(path, false);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!ino.ok()) co_return done(ino.error());
  auto v = co_await fault_in(path, *ino, false);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!v.ok()) co_return done(v.error());
  if ((*v)->kind == FileKind::Dir) co_return done(Err::EISDIR_);
  if (!can_access((*v)->attrs, cred_, true)) co_return done(Err::EACCES_);

  Bytes tpayload;
  auto seq = co_await append_entry(OpKind::Truncate, *ino, size,
                                   std::move(tpayload), (*v)->subtree);
  if (!alive(inc)) co_return done(Err::DstFailed);
  if (!seq.ok()) co_return done(seq.error());
  (*v)->size = size;
  (*v)->mtime = now_mtime();
  rcache_->invalidate_inode(*ino);
  co_return done(Unit{});
}

sim::Co<Result<Unit>> LibFs::setattr(std::string path, Attrs attrs) {
  uint64_t inc = inc_;
  if (dead_) co_return Err::DstFailed;
  auto lease = co_await acquire(path, false, true);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!lease.ok()) co_return lease.error();
  auto ino = co_await resolve(path, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!ino.ok()) co_return ino.error();
  auto v = co_await fault_in(path, *ino, false);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!v.ok()) co_return v.error();
  if (cred_.uid != 0 && cred_.uid != (*v)->attrs.uid) co_return Err::EACCES_;

  Bytes apayload = LogEntry::pack_setattr(attrs);
  auto seq = co_await append_entry(OpKind::SetAttr, *ino, 0,
                                   std::move(apayload), (*v)->subtree);
  if (!alive(inc)) co_return Err::DstFailed;
  if (!seq.ok()) co_return seq.error();
  (*v)->attrs = attrs;
  (*v)->mtime = now_mtime();
  co_return Unit{};
}

}  // namespace cfs::fs
