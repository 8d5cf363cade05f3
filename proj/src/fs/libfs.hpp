/*
 * libfs.hpp
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
#include "fs/read_cache.hpp"
#include "fs/types.hpp"
#include "kernfs/kernfs.hpp"
#include "log/update_log.hpp"
#include "proto/wire.hpp"
#include "world/world.hpp"

namespace cfs::fs {

enum OpenFlags : uint32_t {
  O_RD = 1,
  O_WR = 2,
  O_CREAT_ = 4,
  O_EXCL_ = 8,
  O_TRUNC_ = 16,
};

// Per-process library file system: all IO against the private update log,
// DRAM read cache and the tiered read path; leases acquired on first touch.
class LibFs {
 public:
  LibFs(world::World& w, std::string name, media::NodeId node, Cred cred,
        Mode mode, uint64_t incarnation);

  const std::string& name() const { return name_; }
  const std::string& endpoint() const { return ep_; }
  // Unique per incarnation; keys the mirrored logs at replicas.
  std::string owner_string() const {
    return name_ + "." + std::to_string(inc_);
  }
  const media::NodeId& node() const { return node_; }
  uint64_t incarnation() const { return inc_; }
  bool dead() const { return dead_; }
  void mark_dead() { dead_ = true; }
  log::UpdateLog& update_log() { return *log_; }
  media::RegionId log_region() const { return log_->region(); }
  const std::map<uint64_t, std::shared_ptr<coherence::Lease>>& held_leases()
      const {
    return leases_;
  }
  Mode mode() const { return mode_; }

  // --- POSIX surface ---------------------------------------------------------

  sim::Co<Result<int>> open(std::string path, uint32_t flags,
                            uint32_t mode = 0644);
  sim::Co<Result<Unit>> close(int fd);
  struct ReadResult {
    Bytes data;
    ReadTier provenance;  // slowest tier touched
  };
  sim::Co<Result<ReadResult>> read(int fd, uint64_t len);
  sim::Co<Result<ReadResult>> pread(int fd, uint64_t off, uint64_t len);
  sim::Co<Result<uint64_t>> write(int fd, Bytes data);
  sim::Co<Result<uint64_t>> pwrite(int fd, uint64_t off, Bytes data);
  Result<Unit> seek(int fd, uint64_t off);
  sim::Co<Result<Unit>> fsync(int fd);
  sim::Co<Result<Unit>> dsync(int fd);
  sim::Co<Result<Unit>> unlink(std::string path);
  sim::Co<Result<Unit>> rename(std::string from, std::string to);
  sim::Co<Result<Unit>> mkdir(std::string path, uint32_t mode = 0755);
  sim::Co<Result<std::vector<std::string>>> readdir(std::string path);
  struct StatInfo {
    FileKind kind;
    uint64_t size;
    Attrs attrs;
    uint64_t mtime;
  };
  sim::Co<Result<StatInfo>> stat(std::string path);
  sim::Co<Result<Unit>> truncate(std::string path, uint64_t size);
  sim::Co<Result<Unit>> setattr(std::string path, Attrs attrs);

  // Explicit private-cache eviction (replicate + chain digest).
  sim::Co<Result<Unit>> evict_private_cache();

  // Dynamic log resizing (two-phase commit across the chain). Must be
  // invoked at a digest boundary; grows or shrinks every mirror with it.
  sim::Co<Result<Unit>> resize_log(uint64_t new_capacity);
  uint64_t next_log_size() const;

  // Mapping invalidation callback from the colocated kernfs.
  void invalidate_mapping(InodeNum ino);

  // Revocation entry (arrives via the local kernfs relay).
  sim::Co<Result<Unit>> handle_revoke(proto::LeaseMsg msg);

  uint64_t digests_triggered() const { return digests_; }

 private:
  struct ViewNode {
    FileKind kind = FileKind::File;
    Attrs attrs;
    uint64_t size = 0;
    uint64_t mtime = 0;
    uint32_t subtree = 0;
    bool have_dirents = false;
    std::map<std::string, InodeNum> dirents;
  };
  struct FileHandle {
    std::string path;
    InodeNum ino = 0;
    uint32_t flags = 0;
    uint64_t cursor = 0;
  };
  struct ChainSession {
    uint32_t subtree_id = 0;
    uint64_t ring_tail = 0;
    uint64_t extracted_seq = 0;
    uint64_t acked_seq = 0;
    uint64_t mirror_seq = 0;  // dense mirror-space sequence counter
    struct MirrorRef {
      uint64_t region = 0;
      uint64_t node_incarnation = 0;  // stale after the replica restarts
    };
    // kernfs endpoint -> mirror region at that replica
    std::map<std::string, MirrorRef> mirrors;
    struct Frame {
      uint64_t covers_from, covers_to;   // log-space range
      uint64_t first_mirror_seq = 0;
      std::vector<std::pair<uint64_t, Bytes>> writes;  // ring off -> bytes
    };
    std::vector<Frame> pending;
  };

  // Lease client. Leases and view nodes are handed out as shared
  // ownership: concurrent revocations may detach them from the tables
  // while an operation still holds one across a suspension point.
  using LeasePtr = std::shared_ptr<coherence::Lease>;
  using ViewPtr = std::shared_ptr<ViewNode>;
  sim::Co<Result<LeasePtr>> acquire(std::string scope, bool subtree,
                                    bool write);
  LeasePtr covering(const std::string& path, bool write);
  void lease_usage(uint64_t lease_id, int delta);
  sim::Co<Result<Unit>> release_all_leases();

  // View management.
  sim::Co<Result<InodeNum>> resolve(const std::string& path, bool want_parent);
  sim::Co<Result<ViewPtr>> fault_in(const std::string& path, InodeNum ino,
                                    bool need_dirents);
  ViewPtr view(InodeNum ino);
  void drop_view_under(const std::string& scope, bool subtree);

  // Write path.
  sim::Co<Result<uint64_t>> append_entry(log::OpKind kind, InodeNum ino,
                                         uint64_t offset, Bytes payload,
                                         uint32_t subtree);
  sim::Co<Result<Unit>> maybe_trigger_digest();

  // Read path.
  sim::Co<Result<ReadResult>> read_range(const std::string& path, InodeNum ino,
                                         uint64_t off, uint64_t len);
  sim::Co<Result<bool>> fetch_remote(const std::string& server, InodeNum ino,
                                     uint64_t b, uint64_t len, ReadTier tier,
                                     ReadResult* out, uint64_t out_base);
  sim::Co<Result<Unit>> cache_fill_from_area(InodeNum ino, uint64_t b,
                                             uint64_t e, uint64_t size);
  sim::Co<Result<Unit>> writeback_if_dirty(ReadCache::Evicted ev);

  // Replication.
  sim::Co<Result<Unit>> replicate_all(uint64_t through_seq, bool for_sync);
  sim::Co<Result<Unit>> replicate_subtree(ChainSession& cs,
                                          uint64_t through_seq);
  void extract_frame(ChainSession& cs, uint64_t through_seq);
  std::vector<std::string> chain_targets(uint32_t subtree_id) const;
  // Opens/refreshes mirrors at every target. A member whose mirror went
  // stale (restart) forces a session reset: the still-undigested window is
  // re-extracted for the whole chain on a fresh ring.
  sim::Co<Result<Unit>> ensure_mirrors(ChainSession& cs,
                                       const std::vector<std::string>& targets);
  sim::Co<Result<Unit>> flush_pending(ChainSession& cs);
  sim::Co<Result<ChainSession*>> chain_session(uint32_t subtree_id);
  sim::Co<Result<uint64_t>> open_mirror(const std::string& kernfs_ep,
                                        uint32_t subtree_id, bool reset,
                                        uint64_t base_seq, uint64_t ring_off);
  void refresh_replicated_watermark();

  InodeNum alloc_ino();
  uint64_t now_mtime() const { return w_.loop.now(); }
  bool alive(uint64_t inc) const { return !dead_ && inc == inc_; }
  std::string local_kernfs() const;

  world::World& w_;
  std::string name_;
  media::NodeId node_;
  std::string ep_;
  Cred cred_;
  Mode mode_;
  uint64_t inc_;
  bool dead_ = false;

  std::unique_ptr<log::UpdateLog> log_;
  std::unique_ptr<ReadCache> rcache_;

  std::map<uint64_t, std::shared_ptr<coherence::Lease>> leases_;
  std::map<uint64_t, int> lease_usage_;
  std::map<uint64_t, sim::Future<Unit>> usage_waiters_;
  // Serializes acquires per scope so revocation storms settle determinately.
  sim::AsyncMutex acquire_mutex_;

  std::map<InodeNum, std::shared_ptr<ViewNode>> view_;
  std::map<std::string, InodeNum> path_cache_;

  std::map<int, FileHandle> fds_;
  int next_fd_ = 3;
  uint64_t ino_counter_ = 0;
  uint64_t proc_index_ = 0;

  std::map<uint32_t, ChainSession> chains_;
  sim::AsyncMutex repl_mutex_;
  bool digest_in_progress_ = false;
  sim::Future<Unit> digest_done_;
  uint64_t digests_ = 0;

  // Extent-mapping cache over the colocated kernfs (zero-copy read analog).
  std::map<InodeNum, std::vector<kernfs::KernFs::ExtentSnapshot>> mapping_;
};

}  // namespace cfs::fs
