/*
 * media.hpp
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

#include "sim/event_loop.hpp"
#include "util/bytes.hpp"
#include "util/kvconfig.hpp"
#include "util/result.hpp"

namespace cfs::media {

using sim::Time;
using NodeId = std::string;
using RegionId = uint64_t;

enum class Tier : uint8_t { DRAM = 0, NVM = 1, SSD = 2 };

enum class Locality : uint8_t { Local = 0, Numa = 1, Kernel = 2, Rdma = 3 };

constexpr uint64_t kSsdBlock = 4096;  // SSD IO granularity

const char* tier_name(Tier t);

// Per-(tier, locality) read/write latency in simulated nanoseconds.
// Defaults follow the measured storage hierarchy this simulator models;
// only the relative ordering is contractual.
struct LatencyModel {
  Time dram_read = 82, dram_write = 82;
  Time nvm_local_read = 175, nvm_local_write = 94;
  Time nvm_numa_read = 230, nvm_numa_write = 230;
  Time nvm_kernel_read = 600, nvm_kernel_write = 1000;
  Time nvm_rdma_read = 3000, nvm_rdma_write = 8000;
  Time ssd_read = 10000, ssd_write = 10000;

  Time read_ns(Tier t, Locality l) const;
  Time write_ns(Tier t, Locality l) const;

  static LatencyModel from_config(const KvSection* sec);
  // True when the default Table ordering holds for reads:
  // DRAM < NVM-local < NVM-NUMA < NVM-kernel < NVM-RDMA < SSD.
  bool read_order_sane() const;
};

struct WriteTicket {
  uint64_t index;    // per-region write index, 1-based
  Time persist_at;   // simulated instant the write becomes durable
};

// How a node crash cuts each NVM/SSD write stream. Writes whose persist
// deadline has passed always survive; the cut only picks how much of the
// unpersisted suffix survives with them.
struct CutSpec {
  enum class Kind {
    PersistedOnly,  // drop every unpersisted write
    All,            // keep everything issued (clean cut)
    GlobalIndex,    // keep the first k unpersisted writes in node issue order
    Random,         // seeded random k per node in node issue order
  };
  Kind kind = Kind::All;
  uint64_t k = 0;
  uint64_t seed = 0;

  static CutSpec persisted_only() { return {Kind::PersistedOnly, 0, 0}; }
  static CutSpec all() { return {Kind::All, 0, 0}; }
  static CutSpec global_index(uint64_t k) { return {Kind::GlobalIndex, k, 0}; }
  static CutSpec random(uint64_t seed) { return {Kind::Random, 0, seed}; }
};

struct CrashReport {
  uint64_t unpersisted = 0;  // writes that were still in flight at the crash
  uint64_t kept = 0;         // in-flight writes the cut preserved
  uint64_t dropped = 0;
};

// Simulated storage tiers for every node. Each region is a flat byte array
// with a per-region FIFO persistence pipeline: reads see issued writes
// immediately, durability lags by the tier write latency, and a crash keeps
// exactly a prefix of the issued write sequence.
class MediaStore {
 public:
  MediaStore(sim::EventLoop& loop, const LatencyModel& lat)
      : loop_(loop), lat_(lat) {}

  RegionId create_region(const NodeId& node, Tier tier, const std::string& name,
                         uint64_t capacity);
  bool has_region(RegionId id) const { return regions_.count(id) != 0; }
  // Region lookup by durable name (remount paths after a restart).
  RegionId find_region(const NodeId& node, const std::string& name) const;
  // Replaces a region's backing store with a fresh one of `capacity` bytes
  // (dynamic log resizing commits through this).
  Status resize_region(RegionId id, uint64_t capacity);

  Result<WriteTicket> write_persistent(RegionId id, uint64_t offset,
                                       const Bytes& data,
                                       Locality loc = Locality::Local);
  Result<Bytes> read(RegionId id, uint64_t offset, uint64_t len) const;

  Time read_latency(RegionId id, Locality loc) const;
  uint64_t capacity(RegionId id) const;
  Tier tier(RegionId id) const;
  const std::string& region_name(RegionId id) const;

  // True once every write issued to the region so far is durable.
  bool all_persisted(RegionId id) const;
  Time last_persist_deadline(RegionId id) const;

  // Number of writes on `node`'s durable regions that would be lost by a
  // PersistedOnly cut right now. This is the cut-point enumeration domain.
  uint64_t unpersisted_count(const NodeId& node) const;

  Result<CrashReport> crash(const NodeId& node, const CutSpec& cut);
  Status recover(const NodeId& node);

  // Durable region file: 8 byte magic, version byte, tier byte, reserved,
  // capacity, raw contents. The sidecar `<path>.journal` lists (offset, len)
  // in issue order for cut-point replay in tests.
  Status save_region(RegionId id, const std::string& path) const;
  Result<RegionId> load_region(const NodeId& node, const std::string& path);

  uint64_t bytes_written() const { return bytes_written_; }

 private:
  struct InflightWrite {
    uint64_t index;
    uint64_t node_seq;
    uint64_t offset;
    uint64_t len;
    Bytes undo;  // prior contents of [offset, offset+len)
    Time persist_at;
  };

  struct Region {
    NodeId node;
    Tier tier;
    std::string name;
    uint64_t capacity = 0;
    Bytes visible;                       // latest issued contents
    std::deque<InflightWrite> inflight;  // issued, not yet settled
    uint64_t writes_issued = 0;
    Time last_deadline = 0;
    std::vector<std::pair<uint64_t, uint64_t>> issue_journal;
  };

  void settle(Region& r) const;  // retire in-flight writes whose deadline passed

  sim::EventLoop& loop_;
  const LatencyModel& lat_;
  std::map<RegionId, Region> regions_;
  std::map<NodeId, std::vector<RegionId>> node_regions_;
  std::map<NodeId, uint64_t> node_issue_seq_;
  RegionId next_id_ = 1;
  uint64_t bytes_written_ = 0;
};

}  // namespace cfs::media
