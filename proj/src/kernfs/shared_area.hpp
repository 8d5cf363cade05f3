/*
 * shared_area.hpp
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

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fs/fs_image.hpp"
#include "log/entry.hpp"
#include "media/media.hpp"

namespace cfs::kernfs {

enum class Role : uint8_t { CacheReplica = 0, ReserveReplica = 1 };

// Placement tier of one extent. Cache replicas digest into hot NVM and
// migrate cold data to SSD. Reserve replicas keep their primary copy in
// SSD and an LRU-bounded third-level copy in NVM.
enum class PlaceTier : uint8_t {
  HotNvm = 0,
  ReserveNvm = 1,
  HotSsd = 2,
  ColdSsd = 3,
};

const char* place_tier_name(PlaceTier t);

struct SharedAreaConfig {
  uint64_t journal_capacity = 48ull << 20;
  uint64_t ssd_capacity = 48ull << 20;
  // Logical capacity of live hot-NVM bytes before LRU migration kicks in.
  uint64_t hot_capacity = 8ull << 20;
  // Logical capacity of the reserve replica's NVM third-level area.
  uint64_t reserve_capacity = 8ull << 20;
  double high_water = 0.90;
  double low_water = 0.70;
};

struct MigrationReport {
  uint64_t extents_moved = 0;
  uint64_t bytes_moved = 0;
  bool enospc = false;
};

// Per-kernfs second-level cache: inode metadata plus extent trees mapping
// byte ranges to tiered placements, durably backed by an append-only NVM
// journal (payloads for NVM placements live inline in the journal; SSD
// placements live in a block heap). Everything in memory is reconstructable
// by scanning the journal.
class SharedArea {
 public:
  struct NodeMeta {
    fs::FileKind kind = fs::FileKind::File;
    fs::Attrs attrs;
    uint64_t size = 0;
    uint64_t mtime = 0;
    uint32_t subtree = 0;
    std::map<std::string, fs::InodeNum> dirents;
  };

  struct Extent {
    uint64_t end = 0;
    PlaceTier tier = PlaceTier::HotNvm;
    uint64_t region_off = 0;  // in the journal region (NVM) or SSD heap
    uint64_t ssd_backup = kNoBackup;  // reserve role: SSD copy offset
    uint64_t touch = 0;               // LRU clock
    uint64_t id = 0;
  };
  static constexpr uint64_t kNoBackup = ~uint64_t{0};

  SharedArea(sim::EventLoop& loop, media::MediaStore& media,
             const media::NodeId& node, const std::string& name,
             SharedAreaConfig cfg);

  // Chain role of this node per subtree (cache replica unless set).
  void set_subtree_role(uint32_t subtree_id, Role role);
  Role role_of(uint32_t subtree_id) const;
  // Reserve promotion flips the subtree to cache duty (journaled); its NVM
  // third-level copies become hot extents. Demotion reverses the role.
  void promote_subtree(uint32_t subtree_id);
  void demote_subtree(uint32_t subtree_id);

  media::RegionId journal_region() const { return journal_; }

  // Deterministic baseline namespace (root and configured subtree roots);
  // re-run identically before every journal recovery.
  void bootstrap_dir(fs::InodeNum parent, fs::InodeNum ino,
                     const std::string& name, uint32_t subtree);

  // --- Digestion ---------------------------------------------------------

  bool txn_applied(uint64_t txn) const { return applied_txns_.count(txn) != 0; }

  // Applies one transaction batch. Permission checks run first against the
  // pre-state; any failure leaves the area untouched. On success returns
  // the persist deadline of the last journal write (ack must wait for it).
  Result<sim::Time> apply_batch(const fs::Cred& writer, uint64_t txn,
                                const std::vector<log::LogEntry>& entries,
                                uint64_t epoch);

  // --- Reads --------------------------------------------------------------

  struct ReadHit {
    uint64_t begin, end;
    PlaceTier tier;
    Bytes data;
  };
  // Coverage of [off, off+len) clipped to the file size. Uncovered ranges
  // within the size are zero-filled holes only if the inode has never been
  // invalidated since its extents were dropped.
  std::vector<ReadHit> read(fs::InodeNum ino, uint64_t off, uint64_t len);
  bool covers(fs::InodeNum ino, uint64_t off, uint64_t len) const;

  const NodeMeta* meta(fs::InodeNum ino) const;
  Result<fs::InodeNum> lookup(fs::InodeNum parent,
                              const std::string& name) const;

  // --- Migration / invalidation -------------------------------------------

  MigrationReport migrate_lru();

  // Rejoin: drop all extents of an inode (content must be re-fetched).
  void invalidate_inode(fs::InodeNum ino);
  // Install authoritative metadata fetched from a live replica.
  void install_meta(fs::InodeNum ino, const NodeMeta& m);
  void drop_inode(fs::InodeNum ino);
  // Write back remotely fetched content (repopulation after rejoin, or
  // NVM warming after reserve promotion).
  Status repopulate(fs::InodeNum ino, uint64_t off, const Bytes& data);
  bool pending_invalidation(fs::InodeNum ino) const {
    return invalid_pending_.count(ino) != 0;
  }
  const std::set<fs::InodeNum>& pending_invalidations() const {
    return invalid_pending_;
  }

  // --- Epoch bitmaps -------------------------------------------------------

  const std::map<uint64_t, std::set<fs::InodeNum>>& epoch_bitmaps() const {
    return epochs_;
  }
  void drop_epoch(uint64_t epoch);
  // (epoch, sorted inode list) records for epochs >= from_epoch.
  Bytes serialize_bitmaps(uint64_t from_epoch) const;
  static Result<std::map<uint64_t, std::set<fs::InodeNum>>> parse_bitmaps(
      const Bytes& b);

  // --- Recovery / audit ----------------------------------------------------

  // Rebuilds all in-memory state from the journal region. Partially
  // journaled transactions (no commit record) are discarded.
  Result<uint64_t> recover_from_journal();

  // Full logical state: metadata plus contents assembled from extents.
  fs::FsImage logical_image() const;
  uint64_t state_hash() const { return logical_image().state_hash(); }
  uint64_t state_hash_subtree(uint32_t subtree) const {
    return logical_image().state_hash_subtree(subtree);
  }

  // Whole-inode change notification (digest overwrite, migration,
  // truncation, invalidation). LibFS extent-lookup caches subscribe.
  void set_invalidation_callback(std::function<void(fs::InodeNum)> cb) {
    invalidation_cb_ = std::move(cb);
  }

  uint64_t hot_live_bytes() const { return hot_live_; }
  uint64_t reserve_live_bytes() const { return reserve_live_; }
  const std::map<fs::InodeNum, NodeMeta>& all_meta() const { return meta_; }
  const std::map<fs::InodeNum, std::map<uint64_t, Extent>>& extents() const {
    return extents_;
  }

  static Bytes serialize_meta(const NodeMeta& m);
  static Result<NodeMeta> parse_meta(const Bytes& b);

 private:
  // Journal record kinds.
  enum class Rec : uint8_t {
    TxnBegin = 1,
    Entry = 2,
    TxnCommit = 3,
    Migrate = 4,
    ReserveDrop = 5,
    Invalidate = 6,
    Put = 7,
    MetaPut = 8,
    MetaDrop = 9,
    EpochClean = 10,
    RoleChange = 11,
  };

  Result<uint64_t> journal_append(Rec kind, uint64_t txn, const Bytes& payload,
                                  sim::Time* deadline);
  Result<uint64_t> ssd_alloc(uint64_t len);
  void notify(fs::InodeNum ino) {
    if (invalidation_cb_) invalidation_cb_(ino);
  }

  // In-memory application (journal already written by the caller).
  Status apply_entry_mem(const log::LogEntry& e, uint64_t payload_region_off,
                         const fs::Cred& writer = fs::Cred{0, 0});
  void put_extent(fs::InodeNum ino, uint64_t begin, uint64_t end,
                  PlaceTier tier, uint64_t region_off, uint64_t ssd_backup);
  void drop_extents(fs::InodeNum ino, uint64_t from, uint64_t to);
  Status check_batch_permissions(const fs::Cred& writer,
                                 const std::vector<log::LogEntry>& entries);
  void clear_pending_if_covered(fs::InodeNum ino);
  Bytes read_tier_bytes(PlaceTier tier, uint64_t region_off, uint64_t len);

  void apply_role_change(uint32_t subtree_id, Role role);
  MigrationReport migrate_pool(PlaceTier source);

  sim::EventLoop& loop_;
  media::MediaStore& media_;
  std::map<uint32_t, Role> roles_;
  std::map<uint32_t, Role> initial_roles_;
  SharedAreaConfig cfg_;
  std::string name_;

  media::RegionId journal_ = 0;
  media::RegionId ssd_ = 0;
  uint64_t journal_tail_ = 0;
  uint64_t ssd_tail_ = 0;

  std::map<fs::InodeNum, NodeMeta> meta_;
  std::map<fs::InodeNum, std::map<uint64_t, Extent>> extents_;
  std::set<uint64_t> applied_txns_;
  std::map<uint64_t, std::set<fs::InodeNum>> epochs_;
  std::set<fs::InodeNum> invalid_pending_;

  uint64_t hot_live_ = 0;
  uint64_t reserve_live_ = 0;
  uint64_t touch_clock_ = 0;
  uint64_t next_extent_id_ = 1;
  bool recovering_ = false;

  std::function<void(fs::InodeNum)> invalidation_cb_;

  struct Bootstrap {
    fs::InodeNum parent, ino;
    std::string name;
    uint32_t subtree;
  };
  std::vector<Bootstrap> bootstraps_;
};

}  // namespace cfs::kernfs
