/*
 * media.cpp
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

#include "media/media.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "sim/rng.hpp"
#include "util/hash.hpp"

namespace cfs::media {

namespace {
constexpr char kRegionMagic[8] = {'C', 'F', 'S', 'R', 'E', 'G', 'N', '\0'};
constexpr char kJournalMagic[8] = {'C', 'F', 'S', 'R', 'J', 'R', 'N', '\0'};
constexpr uint8_t kRegionVersion = 1;
}  // namespace

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::DRAM: return "dram";
    case Tier::NVM: return "nvm";
    case Tier::SSD: return "ssd";
  }
  return "?";
}

Time LatencyModel::read_ns(Tier t, Locality l) const {
  switch (t) {
    case Tier::DRAM: return dram_read;
    case Tier::SSD: return ssd_read;
    case Tier::NVM:
      switch (l) {
        case Locality::Local: return nvm_local_read;
        case Locality::Numa: return nvm_numa_read;
        case Locality::Kernel: return nvm_kernel_read;
        case Locality::Rdma: return nvm_rdma_read;
      }
  }
  return nvm_local_read;
}

Time LatencyModel::write_ns(Tier t, Locality l) const {
  switch (t) {
    case Tier::DRAM: return dram_write;
    case Tier::SSD: return ssd_write;
    case Tier::NVM:
      switch (l) {
        case Locality::Local: return nvm_local_write;
        case Locality::Numa: return nvm_numa_write;
        case Locality::Kernel: return nvm_kernel_write;
        case Locality::Rdma: return nvm_rdma_write;
      }
  }
  return nvm_local_write;
}

LatencyModel LatencyModel::from_config(const KvSection* sec) {
  LatencyModel m;
  if (!sec) return m;
  m.dram_read = sec->get_u64("dram_read_ns", m.dram_read);
  m.dram_write = sec->get_u64("dram_write_ns", m.dram_write);
  m.nvm_local_read = sec->get_u64("nvm_local_read_ns", m.nvm_local_read);
  m.nvm_local_write = sec->get_u64("nvm_local_write_ns", m.nvm_local_write);
  m.nvm_numa_read = sec->get_u64("nvm_numa_read_ns", m.nvm_numa_read);
  m.nvm_numa_write = sec->get_u64("nvm_numa_write_ns", m.nvm_numa_write);
  m.nvm_kernel_read = sec->get_u64("nvm_kernel_read_ns", m.nvm_kernel_read);
  m.nvm_kernel_write = sec->get_u64("nvm_kernel_write_ns", m.nvm_kernel_write);
  m.nvm_rdma_read = sec->get_u64("nvm_rdma_read_ns", m.nvm_rdma_read);
  m.nvm_rdma_write = sec->get_u64("nvm_rdma_write_ns", m.nvm_rdma_write);
  m.ssd_read = sec->get_u64("ssd_read_ns", m.ssd_read);
  m.ssd_write = sec->get_u64("ssd_write_ns", m.ssd_write);
  return m;
}

bool LatencyModel::read_order_sane() const {
  return dram_read < nvm_local_read && nvm_local_read < nvm_numa_read &&
         nvm_numa_read < nvm_kernel_read && nvm_kernel_read < nvm_rdma_read &&
         nvm_rdma_read < ssd_read;
}

RegionId MediaStore::create_region(const NodeId& node, Tier tier,
                                   const std::string& name,
                                   uint64_t capacity) {
  CFS_ASSERT(capacity > 0);
  RegionId id = next_id_++;
  Region r;
  r.node = node;
  r.tier = tier;
  r.name = name;
  r.capacity = capacity;
  r.visible.assign(capacity, 0);
  regions_.emplace(id, std::move(r));
  node_regions_[node].push_back(id);
  return id;
}

RegionId MediaStore::find_region(const NodeId& node,
                                 const std::string& name) const {
  auto nit = node_regions_.find(node);
  if (nit == node_regions_.end()) return 0;
  for (RegionId id : nit->second) {
    if (regions_.at(id).name == name) return id;
  }
  return 0;
}

Status MediaStore::resize_region(RegionId id, uint64_t capacity) {
  auto it = regions_.find(id);
  if (it == regions_.end()) return Err::UnknownRegion;
  CFS_ASSERT(capacity > 0);
  Region& r = it->second;
  settle(r);
  r.inflight.clear();
  r.capacity = capacity;
  r.visible.assign(capacity, 0);
  r.issue_journal.clear();
  r.last_deadline = loop_.now();
  return Status{};
}

void MediaStore::settle(Region& r) const {
  while (!r.inflight.empty() && r.inflight.front().persist_at <= loop_.now()) {
    r.inflight.pop_front();
  }
}

Result<WriteTicket> MediaStore::write_persistent(RegionId id, uint64_t offset,
                                                 const Bytes& data,
                                                 Locality loc) {
  auto it = regions_.find(id);
  if (it == regions_.end()) return Err::UnknownRegion;
  Region& r = it->second;
  if (data.empty()) return Err::OutOfRange;
  if (offset + data.size() > r.capacity) return Err::CapacityExceeded;
  if (r.tier == Tier::SSD &&
      (offset % kSsdBlock != 0 || data.size() % kSsdBlock != 0)) {
    return Err::Misaligned;
  }
  settle(r);

  InflightWrite w;
  w.index = ++r.writes_issued;
  w.node_seq = ++node_issue_seq_[r.node];
  w.offset = offset;
  w.len = data.size();
  w.undo.assign(r.visible.begin() + offset,
                r.visible.begin() + offset + data.size());
  // FIFO persistence: deadlines never reorder within a region stream.
  Time deadline = std::max(r.last_deadline, loop_.now()) +
                  lat_.write_ns(r.tier, loc);
  w.persist_at = deadline;
  r.last_deadline = deadline;

  std::memcpy(r.visible.data() + offset, data.data(), data.size());
  if (r.tier != Tier::DRAM) {
    r.inflight.push_back(std::move(w));
    r.issue_journal.emplace_back(offset, data.size());
  }
  bytes_written_ += data.size();
  return WriteTicket{r.writes_issued, deadline};
}

Result<Bytes> MediaStore::read(RegionId id, uint64_t offset,
                               uint64_t len) const {
  auto it = regions_.find(id);
  if (it == regions_.end()) return Err::UnknownRegion;
  const Region& r = it->second;
  if (offset + len > r.capacity) return Err::OutOfRange;
  if (r.tier == Tier::SSD &&
      (offset % kSsdBlock != 0 || len % kSsdBlock != 0)) {
    return Err::Misaligned;
  }
  return Bytes(r.visible.begin() + offset, r.visible.begin() + offset + len);
}

Time MediaStore::read_latency(RegionId id, Locality loc) const {
  auto it = regions_.find(id);
  CFS_ASSERT(it != regions_.end());
  return lat_.read_ns(it->second.tier, loc);
}

uint64_t MediaStore::capacity(RegionId id) const {
  auto it = regions_.find(id);
  CFS_ASSERT(it != regions_.end());
  return it->second.capacity;
}

Tier MediaStore::tier(RegionId id) const {
  auto it = regions_.find(id);
  CFS_ASSERT(it != regions_.end());
  return it->second.tier;
}

const std::string& MediaStore::region_name(RegionId id) const {
  auto it = regions_.find(id);
  CFS_ASSERT(it != regions_.end());
  return it->second.name;
}

bool MediaStore::all_persisted(RegionId id) const {
  auto it = regions_.find(id);
  CFS_ASSERT(it != regions_.end());
  const Region& r = it->second;
  return r.inflight.empty() || r.inflight.back().persist_at <= loop_.now();
}

Time MediaStore::last_persist_deadline(RegionId id) const {
  auto it = regions_.find(id);
  CFS_ASSERT(it != regions_.end());
  return it->second.last_deadline;
}

uint64_t MediaStore::unpersisted_count(const NodeId& node) const {
  uint64_t n = 0;
  auto nit = node_regions_.find(node);
  if (nit == node_regions_.end()) return 0;
  for (RegionId id : nit->second) {
    const Region& r = regions_.at(id);
    if (r.tier == Tier::DRAM) continue;
    for (const auto& w : r.inflight) {
      if (w.persist_at > loop_.now()) n++;
    }
  }
  return n;
}

Result<CrashReport> MediaStore::crash(const NodeId& node, const CutSpec& cut) {
  auto nit = node_regions_.find(node);
  if (nit == node_regions_.end()) return Err::UnknownRegion;
  CrashReport rep;

  // Gather the node's unpersisted writes in node issue order.
  struct Pending {
    Region* region;
    size_t deque_pos;
    uint64_t node_seq;
  };
  std::vector<Pending> pend;
  for (RegionId id : nit->second) {
    Region& r = regions_.at(id);
    if (r.tier == Tier::DRAM) {
      std::fill(r.visible.begin(), r.visible.end(), 0);
      r.inflight.clear();
      continue;
    }
    settle(r);
    for (size_t i = 0; i < r.inflight.size(); i++) {
      pend.push_back({&r, i, r.inflight[i].node_seq});
    }
  }
  std::sort(pend.begin(), pend.end(),
            [](const Pending& a, const Pending& b) {
              return a.node_seq < b.node_seq;
            });
  rep.unpersisted = pend.size();

  uint64_t keep = 0;
  switch (cut.kind) {
    case CutSpec::Kind::PersistedOnly: keep = 0; break;
    case CutSpec::Kind::All: keep = pend.size(); break;
    case CutSpec::Kind::GlobalIndex: keep = std::min<uint64_t>(cut.k, pend.size()); break;
    case CutSpec::Kind::Random: {
      sim::Rng rng(cut.seed ^ hash_str(node));
      keep = rng.below(pend.size() + 1);
      break;
    }
  }
  rep.kept = keep;
  rep.dropped = pend.size() - keep;

  // Dropping a global-order suffix keeps a per-region prefix of each
  // stream. Undo in reverse issue order restores the prior bytes exactly.
  for (size_t i = pend.size(); i > keep; i--) {
    const Pending& p = pend[i - 1];
    InflightWrite& w = p.region->inflight[p.deque_pos];
    std::memcpy(p.region->visible.data() + w.offset, w.undo.data(), w.len);
    CFS_ASSERT(!p.region->issue_journal.empty());
    p.region->issue_journal.pop_back();
    p.region->writes_issued--;
  }
  for (RegionId id : nit->second) {
    Region& r = regions_.at(id);
    r.inflight.clear();
    r.last_deadline = loop_.now();
  }
  return rep;
}

Status MediaStore::recover(const NodeId& node) {
  auto nit = node_regions_.find(node);
  if (nit == node_regions_.end()) return Err::UnknownRegion;
  // Durable regions already hold exactly the cut contents; volatile ones
  // were zeroed at crash time. Remounting is a no-op in the model.
  return Status{};
}

Status MediaStore::save_region(RegionId id, const std::string& path) const {
  auto it = regions_.find(id);
  if (it == regions_.end()) return Err::UnknownRegion;
  const Region& r = it->second;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Err::ParseError;
  out.write(kRegionMagic, 8);
  uint8_t ver = kRegionVersion;
  uint8_t tier = static_cast<uint8_t>(r.tier);
  uint16_t reserved = 0;
  out.write(reinterpret_cast<const char*>(&ver), 1);
  out.write(reinterpret_cast<const char*>(&tier), 1);
  out.write(reinterpret_cast<const char*>(&reserved), 2);
  uint32_t pad = 0;
  out.write(reinterpret_cast<const char*>(&pad), 4);
  uint64_t cap = r.capacity;
  out.write(reinterpret_cast<const char*>(&cap), 8);
  out.write(reinterpret_cast<const char*>(r.visible.data()),
            static_cast<std::streamsize>(r.visible.size()));

  std::ofstream j(path + ".journal", std::ios::binary | std::ios::trunc);
  if (!j) return Err::ParseError;
  j.write(kJournalMagic, 8);
  uint64_t count = r.issue_journal.size();
  j.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& [off, len] : r.issue_journal) {
    j.write(reinterpret_cast<const char*>(&off), 8);
    j.write(reinterpret_cast<const char*>(&len), 8);
  }
  return Status{};
}

Result<RegionId> MediaStore::load_region(const NodeId& node,
                                         const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Err::ParseError;
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kRegionMagic, 8) != 0) return Err::ParseError;
  uint8_t ver = 0, tier = 0;
  uint16_t reserved = 0;
  uint32_t pad = 0;
  in.read(reinterpret_cast<char*>(&ver), 1);
  in.read(reinterpret_cast<char*>(&tier), 1);
  in.read(reinterpret_cast<char*>(&reserved), 2);
  in.read(reinterpret_cast<char*>(&pad), 4);
  if (!in || ver != kRegionVersion || tier > 2) return Err::ParseError;
  uint64_t cap = 0;
  in.read(reinterpret_cast<char*>(&cap), 8);
  if (!in || cap == 0) return Err::ParseError;
  Bytes contents(cap, 0);
  in.read(reinterpret_cast<char*>(contents.data()),
          static_cast<std::streamsize>(cap));
  if (!in) return Err::ParseError;

  RegionId id = create_region(node, static_cast<Tier>(tier), path, cap);
  regions_.at(id).visible = std::move(contents);
  return id;
}

}  // namespace cfs::media
