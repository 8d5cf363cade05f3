/*
 * shared_area.cpp
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

#include "kernfs/shared_area.hpp"

#include <algorithm>
#include <cstring>

#include "util/crc32c.hpp"

namespace cfs::kernfs {

namespace {
constexpr uint32_t kJournalMagic = 0x4E524A43;  // "CJRN"
constexpr size_t kRecHeaderSize = 32;
constexpr uint64_t kInf = ~uint64_t{0};
}  // namespace

const char* place_tier_name(PlaceTier t) {
  switch (t) {
    case PlaceTier::HotNvm: return "hot-nvm";
    case PlaceTier::ReserveNvm: return "reserve-nvm";
    case PlaceTier::HotSsd: return "hot-ssd";
    case PlaceTier::ColdSsd: return "cold-ssd";
  }
  return "?";
}

SharedArea::SharedArea(sim::EventLoop& loop, media::MediaStore& media,
                       const media::NodeId& node, const std::string& name,
                       SharedAreaConfig cfg)
    : loop_(loop), media_(media), cfg_(cfg), name_(name) {
  journal_ = media_.create_region(node, media::Tier::NVM, name + "/journal",
                                  cfg_.journal_capacity);
  ssd_ = media_.create_region(node, media::Tier::SSD, name + "/ssd",
                              cfg_.ssd_capacity);
}

void SharedArea::set_subtree_role(uint32_t subtree_id, Role role) {
  roles_[subtree_id] = role;
  initial_roles_[subtree_id] = role;
}

Role SharedArea::role_of(uint32_t subtree_id) const {
  auto it = roles_.find(subtree_id);
  return it == roles_.end() ? Role::CacheReplica : it->second;
}

void SharedArea::apply_role_change(uint32_t subtree_id, Role role) {
  roles_[subtree_id] = role;
  for (auto& [ino, m] : extents_) {
    auto mit = meta_.find(ino);
    if (mit == meta_.end() || mit->second.subtree != subtree_id) continue;
    for (auto& [b, e] : m) {
      if (role == Role::CacheReplica && e.tier == PlaceTier::ReserveNvm) {
        reserve_live_ -= e.end - b;
        hot_live_ += e.end - b;
        e.tier = PlaceTier::HotNvm;
      } else if (role == Role::ReserveReplica && e.tier == PlaceTier::HotNvm) {
        hot_live_ -= e.end - b;
        reserve_live_ += e.end - b;
        e.tier = PlaceTier::ReserveNvm;
      }
    }
    notify(ino);
  }
}

void SharedArea::promote_subtree(uint32_t subtree_id) {
  Bytes payload;
  ByteWriter w(payload);
  w.u32(subtree_id);
  w.u8(static_cast<uint8_t>(Role::CacheReplica));
  journal_append(Rec::RoleChange, 0, payload, nullptr);
  apply_role_change(subtree_id, Role::CacheReplica);
}

void SharedArea::demote_subtree(uint32_t subtree_id) {
  Bytes payload;
  ByteWriter w(payload);
  w.u32(subtree_id);
  w.u8(static_cast<uint8_t>(Role::ReserveReplica));
  journal_append(Rec::RoleChange, 0, payload, nullptr);
  apply_role_change(subtree_id, Role::ReserveReplica);
}

void SharedArea::bootstrap_dir(fs::InodeNum parent, fs::InodeNum ino,
                               const std::string& name, uint32_t subtree) {
  bootstraps_.push_back(Bootstrap{parent, ino, name, subtree});
  if (!meta_.count(fs::kRootInode)) {
    NodeMeta root;
    root.kind = fs::FileKind::Dir;
    root.attrs.mode = 0755;
    meta_[fs::kRootInode] = root;
  }
  NodeMeta d;
  d.kind = fs::FileKind::Dir;
  d.attrs.mode = 0777;
  d.subtree = subtree;
  meta_[ino] = d;
  meta_[parent].dirents[name] = ino;
}

// --- journal --------------------------------------------------------------

Result<uint64_t> SharedArea::journal_append(Rec kind, uint64_t txn,
                                            const Bytes& payload,
                                            sim::Time* deadline) {
  Bytes rec;
  ByteWriter w(rec);
  w.u32(kJournalMagic);
  w.u8(1);
  w.u8(static_cast<uint8_t>(kind));
  w.u16(0);
  w.u64(txn);
  w.u32(static_cast<uint32_t>(payload.size()));
  w.u64(0);
  CFS_ASSERT(rec.size() == 28);
  uint32_t crc = crc32c(rec.data(), 28);
  crc = crc32c(payload.data(), payload.size(), crc);
  w.u32(crc);
  w.raw(payload);
  w.pad_to(8);

  if (journal_tail_ + rec.size() > cfg_.journal_capacity) return Err::ENOSPC_;
  uint64_t at = journal_tail_;
  auto t = media_.write_persistent(journal_, at, rec);
  if (!t.ok()) return t.error();
  if (deadline) *deadline = std::max(*deadline, t->persist_at);
  journal_tail_ += rec.size();
  return at;
}

Result<uint64_t> SharedArea::ssd_alloc(uint64_t len) {
  uint64_t blocks = (len + media::kSsdBlock - 1) / media::kSsdBlock;
  uint64_t need = blocks * media::kSsdBlock;
  if (ssd_tail_ + need > cfg_.ssd_capacity) return Err::ENOSPC_;
  uint64_t off = ssd_tail_;
  ssd_tail_ += need;
  return off;
}

// --- extents ----------------------------------------------------------------

void SharedArea::drop_extents(fs::InodeNum ino, uint64_t from, uint64_t to) {
  auto mit = extents_.find(ino);
  if (mit == extents_.end()) return;
  auto& m = mit->second;
  auto account = [&](PlaceTier tier, uint64_t n) {
    if (tier == PlaceTier::HotNvm) hot_live_ -= n;
    if (tier == PlaceTier::ReserveNvm) reserve_live_ -= n;
  };
  auto it = m.lower_bound(from);
  if (it != m.begin()) {
    auto prev = std::prev(it);
    if (prev->second.end > from) {
      Extent old = prev->second;
      uint64_t pb = prev->first;
      prev->second.end = from;
      account(old.tier, std::min(old.end, to) - from);
      if (old.end > to) {
        Extent tail = old;
        tail.region_off += to - pb;
        if (tail.ssd_backup != kNoBackup) tail.ssd_backup += to - pb;
        m[to] = tail;
      }
      if (prev->second.end <= pb) m.erase(prev);
    }
  }
  it = m.lower_bound(from);
  while (it != m.end() && it->first < to) {
    if (it->second.end <= to) {
      account(it->second.tier, it->second.end - it->first);
      it = m.erase(it);
    } else {
      Extent old = it->second;
      uint64_t ob = it->first;
      account(old.tier, to - ob);
      m.erase(it);
      Extent tail = old;
      tail.region_off += to - ob;
      if (tail.ssd_backup != kNoBackup) tail.ssd_backup += to - ob;
      m[to] = tail;
      break;
    }
  }
  if (m.empty()) extents_.erase(mit);
}

void SharedArea::put_extent(fs::InodeNum ino, uint64_t begin, uint64_t end,
                            PlaceTier tier, uint64_t region_off,
                            uint64_t ssd_backup) {
  if (begin >= end) return;
  drop_extents(ino, begin, end);
  Extent e;
  e.end = end;
  e.tier = tier;
  e.region_off = region_off;
  e.ssd_backup = ssd_backup;
  e.touch = ++touch_clock_;
  e.id = next_extent_id_++;
  extents_[ino][begin] = e;
  if (tier == PlaceTier::HotNvm) hot_live_ += end - begin;
  if (tier == PlaceTier::ReserveNvm) reserve_live_ += end - begin;
}

// --- digestion ---------------------------------------------------------------

Status SharedArea::check_batch_permissions(
    const fs::Cred& writer, const std::vector<log::LogEntry>& entries) {
  std::set<fs::InodeNum> created;
  auto writable = [&](fs::InodeNum ino) {
    if (created.count(ino)) return true;
    auto it = meta_.find(ino);
    if (it == meta_.end()) return true;  // created earlier in this log
    return fs::can_access(it->second.attrs, writer, /*write=*/true);
  };
  for (const auto& e : entries) {
    switch (e.kind) {
      case log::OpKind::Write:
      case log::OpKind::Truncate:
        if (!writable(e.inode)) return Err::PermissionDenied;
        break;
      case log::OpKind::Create:
      case log::OpKind::Mkdir: {
        auto args = e.create_args();
        if (!args.ok()) return Err::ChecksumFailure;
        if (!writable(args->parent)) return Err::PermissionDenied;
        created.insert(e.inode);
        break;
      }
      case log::OpKind::Unlink: {
        auto args = e.unlink_args();
        if (!args.ok()) return Err::ChecksumFailure;
        if (!writable(args->parent)) return Err::PermissionDenied;
        break;
      }
      case log::OpKind::Rename: {
        auto args = e.rename_args();
        if (!args.ok()) return Err::ChecksumFailure;
        if (!writable(args->src_parent) || !writable(args->dst_parent)) {
          return Err::PermissionDenied;
        }
        break;
      }
      case log::OpKind::SetAttr: {
        auto it = meta_.find(e.inode);
        if (it != meta_.end() && writer.uid != 0 &&
            writer.uid != it->second.attrs.uid) {
          return Err::PermissionDenied;
        }
        break;
      }
    }
  }
  return Status{};
}

Result<sim::Time> SharedArea::apply_batch(
    const fs::Cred& writer, uint64_t txn,
    const std::vector<log::LogEntry>& entries, uint64_t epoch) {
  if (txn_applied(txn)) return loop_.now();  // idempotent re-digest
  if (auto st = check_batch_permissions(writer, entries); !st.ok()) {
    return st.error();
  }

  sim::Time deadline = loop_.now();
  Bytes begin_payload;
  {
    ByteWriter w(begin_payload);
    w.u32(writer.uid);
    w.u32(writer.gid);
    w.u64(epoch);
  }
  if (auto r = journal_append(Rec::TxnBegin, txn, begin_payload, &deadline);
      !r.ok()) {
    return r.error();
  }

  struct Staged {
    const log::LogEntry* e;
    uint64_t payload_region_off;
  };
  std::vector<Staged> staged;
  for (const auto& e : entries) {
    Bytes encoded = log::encode_entry(e);
    auto at = journal_append(Rec::Entry, txn, encoded, &deadline);
    if (!at.ok()) return at.error();  // no commit record: batch is void
    staged.push_back(
        Staged{&e, *at + kRecHeaderSize + log::kEntryHeaderSize});
  }
  if (auto r = journal_append(Rec::TxnCommit, txn, {}, &deadline); !r.ok()) {
    return r.error();
  }

  for (const auto& s : staged) {
    auto st = apply_entry_mem(*s.e, s.payload_region_off, writer);
    if (!st.ok()) {
      // Batches are validated up front; an application failure here would
      // desync memory from the journal.
      CFS_ASSERT_MSG(false, "digest apply failed mid-batch");
    }
    // Epoch bitmap: the inode itself plus touched directories.
    auto mark = [&](fs::InodeNum ino) { epochs_[epoch].insert(ino); };
    mark(s.e->inode);
    if (s.e->kind == log::OpKind::Create || s.e->kind == log::OpKind::Mkdir) {
      if (auto a = s.e->create_args(); a.ok()) mark(a->parent);
    } else if (s.e->kind == log::OpKind::Unlink) {
      if (auto a = s.e->unlink_args(); a.ok()) mark(a->parent);
    } else if (s.e->kind == log::OpKind::Rename) {
      if (auto a = s.e->rename_args(); a.ok()) {
        mark(a->src_parent);
        mark(a->dst_parent);
        if (a->replaced_ino) mark(a->replaced_ino);
      }
    }
  }
  // SSD writes issued while applying must also be durable before the ack.
  deadline = std::max(deadline, media_.last_persist_deadline(ssd_));
  applied_txns_.insert(txn);
  return deadline;
}

Status SharedArea::apply_entry_mem(const log::LogEntry& e,
                                   uint64_t payload_region_off,
                                   const fs::Cred& writer) {
  using log::OpKind;
  switch (e.kind) {
    case OpKind::Write: {
      bool fresh = meta_.count(e.inode) == 0;
      NodeMeta& n = meta_[e.inode];
      if (fresh) {
        // Write ahead of its create record: the inode belongs to whoever
        // is digesting it.
        n.attrs = fs::Attrs{0644, writer.uid, writer.gid};
      }
      n.kind = fs::FileKind::File;
      if (n.subtree == 0) n.subtree = e.subtree;
      uint64_t end = e.offset + e.payload.size();
      if (n.size < end) n.size = end;
      n.mtime = e.mtime;
      if (role_of(e.subtree) == Role::CacheReplica) {
        put_extent(e.inode, e.offset, end, PlaceTier::HotNvm,
                   payload_region_off, kNoBackup);
      } else {
        auto ssd_off = ssd_alloc(e.payload.size());
        if (!ssd_off.ok()) return ssd_off.error();
        if (!recovering_) {
          Bytes padded = e.payload;
          padded.resize((padded.size() + media::kSsdBlock - 1) &
                            ~(media::kSsdBlock - 1),
                        0);
          auto t = media_.write_persistent(ssd_, *ssd_off, padded);
          if (!t.ok()) return t.error();
        }
        put_extent(e.inode, e.offset, end, PlaceTier::ReserveNvm,
                   payload_region_off, *ssd_off);
      }
      notify(e.inode);
      clear_pending_if_covered(e.inode);
      return Status{};
    }
    case OpKind::Create:
    case OpKind::Mkdir: {
      auto args = e.create_args();
      if (!args.ok()) return args.error();
      auto [it, fresh] = meta_.emplace(e.inode, NodeMeta{});
      NodeMeta& n = it->second;
      if (fresh) {
        n.kind = e.kind == OpKind::Mkdir ? fs::FileKind::Dir : fs::FileKind::File;
        n.size = 0;
      }
      n.attrs = args->attrs;
      n.mtime = e.mtime;
      n.subtree = e.subtree;
      meta_[args->parent].dirents[args->name] = e.inode;
      return Status{};
    }
    case OpKind::Unlink: {
      auto args = e.unlink_args();
      if (!args.ok()) return args.error();
      auto pit = meta_.find(args->parent);
      if (pit != meta_.end()) pit->second.dirents.erase(args->name);
      drop_extents(e.inode, 0, kInf);
      meta_.erase(e.inode);
      invalid_pending_.erase(e.inode);
      notify(e.inode);
      return Status{};
    }
    case OpKind::Rename: {
      auto args = e.rename_args();
      if (!args.ok()) return args.error();
      auto sp = meta_.find(args->src_parent);
      if (sp != meta_.end()) sp->second.dirents.erase(args->src_name);
      if (args->replaced_ino != 0) {
        drop_extents(args->replaced_ino, 0, kInf);
        meta_.erase(args->replaced_ino);
        notify(args->replaced_ino);
      }
      meta_[args->dst_parent].dirents[args->dst_name] = e.inode;
      return Status{};
    }
    case OpKind::Truncate: {
      auto it = meta_.find(e.inode);
      if (it == meta_.end()) return Err::ENOENT_;
      it->second.size = e.offset;
      it->second.mtime = e.mtime;
      drop_extents(e.inode, e.offset, kInf);
      notify(e.inode);
      return Status{};
    }
    case OpKind::SetAttr: {
      auto args = e.setattr_args();
      if (!args.ok()) return args.error();
      auto it = meta_.find(e.inode);
      if (it == meta_.end()) return Err::ENOENT_;
      it->second.attrs = *args;
      it->second.mtime = e.mtime;
      return Status{};
    }
  }
  return Err::EINVAL_;
}

// --- reads -------------------------------------------------------------------

Bytes SharedArea::read_tier_bytes(PlaceTier tier, uint64_t region_off,
                                  uint64_t len) {
  if (tier == PlaceTier::HotNvm || tier == PlaceTier::ReserveNvm) {
    auto r = media_.read(journal_, region_off, len);
    CFS_ASSERT(r.ok());
    return std::move(r.value());
  }
  uint64_t base = region_off & ~(media::kSsdBlock - 1);
  uint64_t end = (region_off + len + media::kSsdBlock - 1) &
                 ~(media::kSsdBlock - 1);
  auto r = media_.read(ssd_, base, end - base);
  CFS_ASSERT(r.ok());
  Bytes out(r->begin() + (region_off - base),
            r->begin() + (region_off - base) + len);
  return out;
}

std::vector<SharedArea::ReadHit> SharedArea::read(fs::InodeNum ino,
                                                  uint64_t off, uint64_t len) {
  std::vector<ReadHit> out;
  auto mit = meta_.find(ino);
  if (mit == meta_.end()) return out;
  uint64_t end = std::min(off + len, mit->second.size);
  if (off >= end) return out;
  auto eit = extents_.find(ino);
  if (eit == extents_.end()) return out;
  const auto& m = eit->second;
  auto it = m.upper_bound(off);
  if (it != m.begin()) {
    auto prev = std::prev(it);
    if (prev->second.end > off) it = prev;
  }
  for (; it != m.end() && it->first < end; ++it) {
    uint64_t b = std::max(off, it->first);
    uint64_t e = std::min(end, it->second.end);
    if (b >= e) continue;
    Extent& ext = const_cast<Extent&>(it->second);
    ext.touch = ++touch_clock_;
    Bytes data =
        read_tier_bytes(ext.tier, ext.region_off + (b - it->first), e - b);
    out.push_back(ReadHit{b, e, ext.tier, std::move(data)});
  }
  return out;
}

bool SharedArea::covers(fs::InodeNum ino, uint64_t off, uint64_t len) const {
  auto mit = meta_.find(ino);
  if (mit == meta_.end()) return false;
  uint64_t end = std::min(off + len, mit->second.size);
  if (off >= end) return true;  // beyond size: zero bytes to serve
  if (!invalid_pending_.count(ino)) return true;  // holes read as zeroes
  // Invalidated content may only be served where extents exist again.
  auto eit = extents_.find(ino);
  if (eit == extents_.end()) return false;
  uint64_t pos = off;
  for (auto it = eit->second.begin(); it != eit->second.end() && pos < end;
       ++it) {
    if (it->first > pos) return false;
    if (it->second.end > pos) pos = it->second.end;
  }
  return pos >= end;
}

const SharedArea::NodeMeta* SharedArea::meta(fs::InodeNum ino) const {
  auto it = meta_.find(ino);
  return it == meta_.end() ? nullptr : &it->second;
}

Result<fs::InodeNum> SharedArea::lookup(fs::InodeNum parent,
                                        const std::string& name) const {
  auto it = meta_.find(parent);
  if (it == meta_.end()) return Err::ENOENT_;
  if (it->second.kind != fs::FileKind::Dir) return Err::ENOTDIR_;
  auto d = it->second.dirents.find(name);
  if (d == it->second.dirents.end()) return Err::ENOENT_;
  return d->second;
}

// --- migration / invalidation -----------------------------------------------

MigrationReport SharedArea::migrate_lru() {
  MigrationReport total = migrate_pool(PlaceTier::HotNvm);
  MigrationReport res = migrate_pool(PlaceTier::ReserveNvm);
  total.extents_moved += res.extents_moved;
  total.bytes_moved += res.bytes_moved;
  total.enospc = total.enospc || res.enospc;
  return total;
}

MigrationReport SharedArea::migrate_pool(PlaceTier source) {
  MigrationReport rep;
  uint64_t live = source == PlaceTier::HotNvm ? hot_live_ : reserve_live_;
  uint64_t cap =
      source == PlaceTier::HotNvm ? cfg_.hot_capacity : cfg_.reserve_capacity;
  if (live <= static_cast<uint64_t>(cap * cfg_.high_water)) return rep;
  uint64_t target = static_cast<uint64_t>(cap * cfg_.low_water);

  struct Victim {
    uint64_t touch;
    fs::InodeNum ino;
    uint64_t begin;
  };
  std::vector<Victim> victims;
  for (const auto& [ino, m] : extents_) {
    for (const auto& [b, e] : m) {
      if (e.tier == source) victims.push_back(Victim{e.touch, ino, b});
    }
  }
  std::sort(victims.begin(), victims.end(), [](const Victim& a, const Victim& b) {
    if (a.touch != b.touch) return a.touch < b.touch;
    if (a.ino != b.ino) return a.ino < b.ino;
    return a.begin < b.begin;
  });

  uint64_t remaining = live;
  for (const auto& v : victims) {
    if (remaining <= target) break;
    auto eit = extents_.find(v.ino);
    if (eit == extents_.end()) continue;
    auto it = eit->second.find(v.begin);
    if (it == eit->second.end() || it->second.tier != source) continue;
    uint64_t len = it->second.end - v.begin;

    if (source == PlaceTier::HotNvm) {
      // Copy hot bytes to the cold SSD heap and retarget the extent.
      Bytes data = read_tier_bytes(it->second.tier, it->second.region_off, len);
      auto ssd_off = ssd_alloc(len);
      if (!ssd_off.ok()) {
        rep.enospc = true;
        break;
      }
      Bytes padded = data;
      padded.resize((padded.size() + media::kSsdBlock - 1) &
                        ~(media::kSsdBlock - 1),
                    0);
      auto t = media_.write_persistent(ssd_, *ssd_off, padded);
      CFS_ASSERT(t.ok());
      Bytes payload;
      ByteWriter w(payload);
      w.u64(v.ino);
      w.u64(v.begin);
      w.u64(it->second.end);
      w.u8(static_cast<uint8_t>(PlaceTier::ColdSsd));
      w.u64(*ssd_off);
      auto jr = journal_append(Rec::Migrate, 0, payload, nullptr);
      if (!jr.ok()) {
        rep.enospc = true;
        break;
      }
      it->second.tier = PlaceTier::ColdSsd;
      it->second.region_off = *ssd_off;
      hot_live_ -= len;
    } else {
      // Reserve pool: drop the NVM copy; the SSD primary remains. Extents
      // demoted from hot duty carry no SSD copy and stay pinned.
      if (it->second.ssd_backup == kNoBackup) continue;
      Bytes payload;
      ByteWriter w(payload);
      w.u64(v.ino);
      w.u64(v.begin);
      w.u64(it->second.end);
      auto jr = journal_append(Rec::ReserveDrop, 0, payload, nullptr);
      if (!jr.ok()) {
        rep.enospc = true;
        break;
      }
      it->second.tier = PlaceTier::HotSsd;
      it->second.region_off = it->second.ssd_backup;
      reserve_live_ -= len;
    }
    remaining -= len;
    rep.extents_moved++;
    rep.bytes_moved += len;
    notify(v.ino);
  }
  return rep;
}

void SharedArea::invalidate_inode(fs::InodeNum ino) {
  Bytes payload;
  ByteWriter w(payload);
  w.u64(ino);
  journal_append(Rec::Invalidate, 0, payload, nullptr);
  drop_extents(ino, 0, kInf);
  invalid_pending_.insert(ino);
  notify(ino);
}

void SharedArea::install_meta(fs::InodeNum ino, const NodeMeta& m) {
  Bytes payload;
  ByteWriter w(payload);
  w.u64(ino);
  w.raw(serialize_meta(m));
  journal_append(Rec::MetaPut, 0, payload, nullptr);
  meta_[ino] = m;
  notify(ino);
}

void SharedArea::drop_inode(fs::InodeNum ino) {
  Bytes payload;
  ByteWriter w(payload);
  w.u64(ino);
  journal_append(Rec::MetaDrop, 0, payload, nullptr);
  drop_extents(ino, 0, kInf);
  meta_.erase(ino);
  invalid_pending_.erase(ino);
  notify(ino);
}

Status SharedArea::repopulate(fs::InodeNum ino, uint64_t off,
                              const Bytes& data) {
  if (data.empty()) return Status{};
  Bytes payload;
  ByteWriter w(payload);
  w.u64(ino);
  w.u64(off);
  w.u8(static_cast<uint8_t>(PlaceTier::HotNvm));
  w.raw(data);
  auto at = journal_append(Rec::Put, 0, payload, nullptr);
  if (!at.ok()) return at.error();
  put_extent(ino, off, off + data.size(), PlaceTier::HotNvm,
             *at + kRecHeaderSize + 17, kNoBackup);
  clear_pending_if_covered(ino);
  return Status{};
}

void SharedArea::clear_pending_if_covered(fs::InodeNum ino) {
  auto pit = invalid_pending_.find(ino);
  if (pit == invalid_pending_.end()) return;
  auto mit = meta_.find(ino);
  if (mit == meta_.end()) {
    invalid_pending_.erase(pit);
    return;
  }
  uint64_t size = mit->second.size;
  if (size == 0) {
    invalid_pending_.erase(pit);
    return;
  }
  auto eit = extents_.find(ino);
  if (eit == extents_.end()) return;
  uint64_t pos = 0;
  for (const auto& [b, e] : eit->second) {
    if (b > pos) return;
    pos = std::max(pos, e.end);
    if (pos >= size) break;
  }
  if (pos >= size) invalid_pending_.erase(pit);
}

// --- epochs -------------------------------------------------------------------

void SharedArea::drop_epoch(uint64_t epoch) {
  Bytes payload;
  ByteWriter w(payload);
  w.u64(epoch);
  journal_append(Rec::EpochClean, 0, payload, nullptr);
  epochs_.erase(epoch);
}

Bytes SharedArea::serialize_bitmaps(uint64_t from_epoch) const {
  Bytes out;
  ByteWriter w(out);
  uint32_t count = 0;
  for (const auto& [e, _] : epochs_) {
    if (e >= from_epoch) count++;
  }
  w.u32(count);
  for (const auto& [e, inos] : epochs_) {
    if (e < from_epoch) continue;
    w.u64(e);
    w.u64(inos.size());
    for (fs::InodeNum ino : inos) w.u64(ino);
  }
  return out;
}

Result<std::map<uint64_t, std::set<fs::InodeNum>>> SharedArea::parse_bitmaps(
    const Bytes& b) {
  ByteReader r(b);
  std::map<uint64_t, std::set<fs::InodeNum>> out;
  uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; i++) {
    uint64_t epoch = r.u64();
    uint64_t n = r.u64();
    auto& s = out[epoch];
    for (uint64_t j = 0; j < n; j++) s.insert(r.u64());
  }
  if (!r.ok()) return Err::ChecksumFailure;
  return out;
}

// --- meta serialization --------------------------------------------------------

Bytes SharedArea::serialize_meta(const NodeMeta& m) {
  Bytes out;
  ByteWriter w(out);
  w.u8(static_cast<uint8_t>(m.kind));
  w.u32(m.attrs.mode);
  w.u32(m.attrs.uid);
  w.u32(m.attrs.gid);
  w.u64(m.size);
  w.u64(m.mtime);
  w.u32(m.subtree);
  w.u32(static_cast<uint32_t>(m.dirents.size()));
  for (const auto& [name, ino] : m.dirents) {
    w.str(name);
    w.u64(ino);
  }
  return out;
}

Result<SharedArea::NodeMeta> SharedArea::parse_meta(const Bytes& b) {
  ByteReader r(b);
  NodeMeta m;
  m.kind = static_cast<fs::FileKind>(r.u8());
  m.attrs.mode = r.u32();
  m.attrs.uid = r.u32();
  m.attrs.gid = r.u32();
  m.size = r.u64();
  m.mtime = r.u64();
  m.subtree = r.u32();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; i++) {
    std::string name = r.str();
    m.dirents[name] = r.u64();
  }
  if (!r.ok()) return Err::ChecksumFailure;
  return m;
}

// --- recovery -------------------------------------------------------------------

Result<uint64_t> SharedArea::recover_from_journal() {
  meta_.clear();
  extents_.clear();
  applied_txns_.clear();
  epochs_.clear();
  invalid_pending_.clear();
  hot_live_ = reserve_live_ = 0;
  ssd_tail_ = 0;
  journal_tail_ = 0;
  roles_ = initial_roles_;
  recovering_ = true;

  auto boots = bootstraps_;
  bootstraps_.clear();
  for (const auto& b : boots) bootstrap_dir(b.parent, b.ino, b.name, b.subtree);

  struct PendingTxn {
    uint64_t txn = 0;
    fs::Cred writer;
    uint64_t epoch = 0;
    std::vector<std::pair<log::LogEntry, uint64_t>> entries;
    bool open = false;
  } pending;

  uint64_t records = 0;
  uint64_t pos = 0;
  uint64_t cap = cfg_.journal_capacity;
  while (pos + kRecHeaderSize <= cap) {
    auto head = media_.read(journal_, pos, kRecHeaderSize);
    CFS_ASSERT(head.ok());
    ByteReader r(*head);
    if (r.u32() != kJournalMagic) break;
    if (r.u8() != 1) break;
    uint8_t kind = r.u8();
    r.u16();
    uint64_t txn = r.u64();
    uint32_t plen = r.u32();
    r.u64();
    uint64_t total = (kRecHeaderSize + plen + 7) & ~uint64_t{7};
    if (pos + total > cap) break;
    auto whole = media_.read(journal_, pos, kRecHeaderSize + plen);
    CFS_ASSERT(whole.ok());
    uint32_t want = 0;
    std::memcpy(&want, whole->data() + 28, 4);
    uint32_t got = crc32c(whole->data(), 28);
    got = crc32c(whole->data() + kRecHeaderSize, plen, got);
    if (got != want) break;
    Bytes payload(whole->begin() + kRecHeaderSize, whole->end());

    switch (static_cast<Rec>(kind)) {
      case Rec::TxnBegin: {
        ByteReader pr(payload);
        pending = PendingTxn{};
        pending.txn = txn;
        pending.writer.uid = pr.u32();
        pending.writer.gid = pr.u32();
        pending.epoch = pr.u64();
        pending.open = true;
        break;
      }
      case Rec::Entry: {
        size_t consumed = 0;
        auto e = log::decode_entry(payload.data(), payload.size(), &consumed);
        if (!e.ok()) { pos = cap; break; }
        if (pending.open && pending.txn == txn) {
          pending.entries.emplace_back(
              std::move(e.value()),
              pos + kRecHeaderSize + log::kEntryHeaderSize);
        }
        break;
      }
      case Rec::TxnCommit: {
        if (pending.open && pending.txn == txn &&
            !applied_txns_.count(txn)) {
          for (auto& [e, off] : pending.entries) {
            apply_entry_mem(e, off, pending.writer);
            auto mark = [&](fs::InodeNum ino) {
              epochs_[pending.epoch].insert(ino);
            };
            mark(e.inode);
            if (e.kind == log::OpKind::Create || e.kind == log::OpKind::Mkdir) {
              if (auto a = e.create_args(); a.ok()) mark(a->parent);
            } else if (e.kind == log::OpKind::Unlink) {
              if (auto a = e.unlink_args(); a.ok()) mark(a->parent);
            } else if (e.kind == log::OpKind::Rename) {
              if (auto a = e.rename_args(); a.ok()) {
                mark(a->src_parent);
                mark(a->dst_parent);
                if (a->replaced_ino) mark(a->replaced_ino);
              }
            }
          }
          applied_txns_.insert(txn);
        }
        pending = PendingTxn{};
        break;
      }
      case Rec::Migrate: {
        ByteReader pr(payload);
        fs::InodeNum ino = pr.u64();
        uint64_t b = pr.u64();
        uint64_t e = pr.u64();
        PlaceTier tier = static_cast<PlaceTier>(pr.u8());
        uint64_t off = pr.u64();
        // Re-run the allocation so later allocations line up.
        ssd_alloc(e - b);
        put_extent(ino, b, e, tier, off, kNoBackup);
        break;
      }
      case Rec::ReserveDrop: {
        ByteReader pr(payload);
        fs::InodeNum ino = pr.u64();
        uint64_t b = pr.u64();
        uint64_t e = pr.u64();
        auto eit = extents_.find(ino);
        if (eit != extents_.end()) {
          for (auto& [eb, ext] : eit->second) {
            if (eb >= b && ext.end <= e &&
                ext.tier == PlaceTier::ReserveNvm &&
                ext.ssd_backup != kNoBackup) {
              reserve_live_ -= ext.end - eb;
              ext.tier = PlaceTier::HotSsd;
              ext.region_off = ext.ssd_backup;
            }
          }
        }
        break;
      }
      case Rec::Invalidate: {
        ByteReader pr(payload);
        fs::InodeNum ino = pr.u64();
        drop_extents(ino, 0, kInf);
        invalid_pending_.insert(ino);
        break;
      }
      case Rec::Put: {
        ByteReader pr(payload);
        fs::InodeNum ino = pr.u64();
        uint64_t off = pr.u64();
        pr.u8();
        uint64_t dlen = payload.size() - 17;
        put_extent(ino, off, off + dlen, PlaceTier::HotNvm,
                   pos + kRecHeaderSize + 17, kNoBackup);
        clear_pending_if_covered(ino);
        break;
      }
      case Rec::MetaPut: {
        ByteReader pr(payload);
        fs::InodeNum ino = pr.u64();
        Bytes rest(payload.begin() + 8, payload.end());
        auto m = parse_meta(rest);
        if (m.ok()) meta_[ino] = *m;
        break;
      }
      case Rec::MetaDrop: {
        ByteReader pr(payload);
        fs::InodeNum ino = pr.u64();
        drop_extents(ino, 0, kInf);
        meta_.erase(ino);
        invalid_pending_.erase(ino);
        break;
      }
      case Rec::EpochClean: {
        ByteReader pr(payload);
        epochs_.erase(pr.u64());
        break;
      }
      case Rec::RoleChange: {
        ByteReader pr(payload);
        uint32_t subtree_id = pr.u32();
        Role role = static_cast<Role>(pr.u8());
        apply_role_change(subtree_id, role);
        break;
      }
      default:
        pos = cap;
        break;
    }
    if (pos >= cap) break;
    pos += total;
    records++;
  }
  journal_tail_ = pos;
  recovering_ = false;
  return records;
}

// --- logical image ---------------------------------------------------------------

fs::FsImage SharedArea::logical_image() const {
  fs::FsImage img;
  img.nodes.clear();
  for (const auto& [ino, m] : meta_) {
    fs::FsImage::Node n;
    n.kind = m.kind;
    n.attrs = m.attrs;
    n.size = m.size;
    n.mtime = m.mtime;
    n.subtree = m.subtree;
    n.dirents = m.dirents;
    if (m.kind == fs::FileKind::File && m.size > 0) {
      n.data.assign(m.size, 0);
      auto eit = extents_.find(ino);
      if (eit != extents_.end()) {
        for (const auto& [b, ext] : eit->second) {
          if (b >= m.size) continue;
          uint64_t e = std::min(ext.end, m.size);
          // Const read without touching the LRU clock.
          auto self = const_cast<SharedArea*>(this);
          uint64_t saved = self->touch_clock_;
          Bytes data = self->read_tier_bytes(ext.tier, ext.region_off, e - b);
          self->touch_clock_ = saved;
          std::copy(data.begin(), data.end(), n.data.begin() + b);
        }
      }
    }
    img.nodes[ino] = std::move(n);
  }
  return img;
}

}  // namespace cfs::kernfs
