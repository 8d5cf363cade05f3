/*
 * update_log.hpp
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

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "log/entry.hpp"
#include "media/media.hpp"
#include "util/interval_set.hpp"

namespace cfs::log {

// Region layout: a 64 byte superblock, then a ring data area.
//
// Superblock: magic u32 "CLSB", version u8, pad u8 x3, capacity u64,
// head_off u64 (ring-relative), head_seq u64 (first live seq),
// digested_seq u64, pad to 60, crc32c u32.
//
// Entries are written contiguously; when one does not fit before the end
// of the data area an 8 byte wrap sentinel (magic u32 "CWRP", expected seq
// low bits u32) is written and the stream continues at ring offset 0. The
// tail is not stored: recovery scans forward from the head, accepting
// checksummed entries with contiguous sequence numbers.
constexpr uint64_t kLogSuperblockSize = 64;
constexpr uint32_t kLogSuperMagic = 0x42534C43;  // "CLSB"
constexpr uint32_t kWrapMagic = 0x50525743;      // "CWRP"

struct LogScan {
  uint64_t head_off = 0;
  uint64_t head_seq = 1;       // seq the head position expects next
  uint64_t digested_seq = 0;
  uint64_t tail_off = 0;
  uint64_t tail_seq = 0;       // last live seq (0 when empty)
  std::vector<LogEntry> live;  // entries in seq order
  std::vector<uint64_t> live_offsets;
};

// Byte coverage of the latest WRITE entries, per inode: the log hashtable.
class LogIndex {
 public:
  struct Hit {
    uint64_t begin, end;  // byte range within the file
    uint64_t seq;
    uint64_t payload_region_off;  // region offset of these exact bytes
  };

  void insert(fs::InodeNum ino, uint64_t begin, uint64_t end, uint64_t seq,
              uint64_t payload_region_off);
  void truncate(fs::InodeNum ino, uint64_t size, uint64_t seq);
  void drop_inode(fs::InodeNum ino);
  // Removes coverage produced by entries at or below `seq` (digested).
  void clear_through(uint64_t seq);
  void clear() { map_.clear(); }

  // Latest coverage intersecting [begin, end), ascending; gaps are absent.
  std::vector<Hit> lookup(fs::InodeNum ino, uint64_t begin, uint64_t end) const;

  // Test oracle support: full coverage dump for comparison with a linear
  // scan of live entries.
  std::map<fs::InodeNum, std::vector<Hit>> dump() const;

 private:
  struct Rng {
    uint64_t end;
    uint64_t seq;
    uint64_t payload_region_off;
  };
  std::map<fs::InodeNum, std::map<uint64_t, Rng>> map_;
};

// The per-process persistent update log. Single owner appends; digestion
// advances the head; entries between head and tail are live.
class UpdateLog {
 public:
  UpdateLog(sim::EventLoop& loop, media::MediaStore& media,
            media::RegionId region, std::string owner, uint64_t owner_token);

  // Writes a fresh superblock (drops any previous contents).
  void format();
  // Rebuilds in-memory state from the region after a restart. Returns the
  // number of live entries recovered.
  Result<uint64_t> mount();

  media::RegionId region() const { return region_; }
  const std::string& owner() const { return owner_; }
  uint64_t capacity() const { return data_cap_; }
  uint64_t used() const { return used_; }
  uint64_t free_space() const;

  uint64_t tail_seq() const { return tail_seq_; }
  uint64_t digested_seq() const { return digested_seq_; }
  uint64_t replicated_seq() const { return replicated_seq_; }
  void set_replicated_seq(uint64_t s);

  uint64_t next_txn() { return (owner_token_ << 32) | ++txn_counter_; }

  // Appends one entry; seq and txn are assigned here (txn may be passed for
  // multi-entry transactions). Returns the assigned seq, or LogFull /
  // CapacityExceeded when it cannot fit.
  Result<uint64_t> append(OpKind kind, fs::InodeNum ino, uint64_t offset,
                          Bytes payload, uint32_t subtree, uint64_t mtime,
                          uint64_t txn = 0);
  // Persist deadline of the last appended entry.
  sim::Time last_append_deadline() const { return last_deadline_; }

  // Live entries with from_seq <= seq <= to_seq, decoded from the region.
  std::vector<LogEntry> entries(uint64_t from_seq, uint64_t to_seq) const;
  std::vector<LogEntry> entries_for_subtree(uint32_t subtree,
                                            uint64_t from_seq,
                                            uint64_t to_seq) const;

  // Digestion completed through `seq`: advances the head past those
  // entries, clears their index coverage, persists the superblock.
  void advance_head(uint64_t seq);

  const LogIndex& index() const { return index_; }

  // Invariant check used by tests: index coverage equals a linear scan.
  bool index_matches_linear_scan() const;

  static Result<LogScan> scan_region(const media::MediaStore& media,
                                     media::RegionId region);

  // Writes a superblock directly (mirrored logs at replicas are maintained
  // without an UpdateLog instance). Returns the persist ticket.
  static media::WriteTicket put_superblock(media::MediaStore& media,
                                           media::RegionId region,
                                           uint64_t head_off,
                                           uint64_t head_seq,
                                           uint64_t digested_seq);

 private:
  struct LiveEntry {
    uint64_t seq;
    uint64_t off;         // ring offset of the entry
    uint64_t media_size;  // encoded size on media
    uint32_t subtree;
  };

  void write_superblock();
  uint64_t ring_to_region(uint64_t ring_off) const {
    return kLogSuperblockSize + ring_off;
  }
  void index_entry(const LogEntry& e, uint64_t ring_off);

  sim::EventLoop& loop_;
  media::MediaStore& media_;
  media::RegionId region_;
  std::string owner_;
  uint64_t owner_token_;
  uint64_t txn_counter_ = 0;

  uint64_t data_cap_ = 0;
  uint64_t head_off_ = 0;
  uint64_t tail_off_ = 0;
  uint64_t head_seq_ = 1;    // next seq expected at head (digested + 1)
  uint64_t tail_seq_ = 0;    // last appended seq
  uint64_t digested_seq_ = 0;
  uint64_t replicated_seq_ = 0;
  uint64_t used_ = 0;
  sim::Time last_deadline_ = 0;

  std::deque<LiveEntry> live_;
  LogIndex index_;
};

}  // namespace cfs::log
