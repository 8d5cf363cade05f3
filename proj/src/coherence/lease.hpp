/*
 * lease.hpp
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
#include <string>
#include <vector>

#include "media/media.hpp"
#include "proto/wire.hpp"
#include "sim/event_loop.hpp"

namespace cfs::coherence {

// Read-shared / write-exclusive grant over a file or subtree.
struct Lease {
  uint64_t id = 0;
  uint32_t subtree_id = 0;
  std::string scope;
  bool subtree = false;
  bool write = false;
  std::string holder;        // logical process name
  std::string holder_libfs;  // current instance endpoint
  std::string home_kernfs;   // kernfs that relays revocations
  sim::Time expiry = 0;
  // Holder-side only: set when a revocation arrived; the lease must not
  // cover any further operations while its transfer is in progress.
  bool revoking = false;

  proto::LeaseRecord to_record(uint8_t kind) const {
    proto::LeaseRecord r;
    r.kind = kind;
    r.lease_id = id;
    r.subtree_id = subtree_id;
    r.scope = scope;
    r.subtree = subtree;
    r.write = write;
    r.holder = holder;
    r.holder_libfs = holder_libfs;
    r.home_kernfs = home_kernfs;
    r.expiry = expiry;
    return r;
  }
  static Lease from_record(const proto::LeaseRecord& r) {
    Lease l;
    l.id = r.lease_id;
    l.subtree_id = r.subtree_id;
    l.scope = r.scope;
    l.subtree = r.subtree;
    l.write = r.write;
    l.holder = r.holder;
    l.holder_libfs = r.holder_libfs;
    l.home_kernfs = r.home_kernfs;
    l.expiry = r.expiry;
    return l;
  }
};

// A subtree scope covers everything at or below its root; file scopes cover
// only themselves. Component-wise, so "/tmp/x" never covers "/tmp/xy".
inline bool scopes_overlap(const std::string& a_scope, bool a_subtree,
                           const std::string& b_scope, bool b_subtree) {
  if (a_scope == b_scope) return true;
  if (a_subtree && fs::path_is_or_under(b_scope, a_scope)) return true;
  if (b_subtree && fs::path_is_or_under(a_scope, b_scope)) return true;
  return false;
}

inline bool leases_conflict(const Lease& a, const Lease& b) {
  if (a.subtree_id != b.subtree_id) return false;
  if (!(a.write || b.write)) return false;  // read leases coexist
  return scopes_overlap(a.scope, a.subtree, b.scope, b.subtree);
}

// Whether a lease covers one path for the requested access.
inline bool lease_covers(const Lease& l, const std::string& path, bool write) {
  if (write && !l.write) return false;
  if (l.subtree) return fs::path_is_or_under(path, l.scope);
  return l.scope == path;
}

class LeaseTable {
 public:
  void insert(const Lease& l) { leases_[l.id] = l; }
  void erase(uint64_t id) { leases_.erase(id); }
  const Lease* find(uint64_t id) const {
    auto it = leases_.find(id);
    return it == leases_.end() ? nullptr : &it->second;
  }
  Lease* find_mut(uint64_t id) {
    auto it = leases_.find(id);
    return it == leases_.end() ? nullptr : &it->second;
  }

  std::vector<uint64_t> conflicting(uint32_t subtree_id,
                                    const std::string& scope, bool subtree,
                                    bool write,
                                    const std::string& requester) const {
    Lease probe;
    probe.subtree_id = subtree_id;
    probe.scope = scope;
    probe.subtree = subtree;
    probe.write = write;
    std::vector<uint64_t> out;
    for (const auto& [id, l] : leases_) {
      if (l.holder == requester) continue;  // upgrades handled separately
      if (leases_conflict(probe, l)) out.push_back(id);
    }
    return out;
  }

  // The requester's own lease on this exact scope (upgrade/renew path).
  Lease* own_lease(uint32_t subtree_id, const std::string& scope, bool subtree,
                   const std::string& holder) {
    for (auto& [id, l] : leases_) {
      if (l.subtree_id == subtree_id && l.scope == scope &&
          l.subtree == subtree && l.holder == holder) {
        return &l;
      }
    }
    return nullptr;
  }

  std::vector<Lease> for_subtree(uint32_t subtree_id) const {
    std::vector<Lease> out;
    for (const auto& [id, l] : leases_) {
      if (l.subtree_id == subtree_id) out.push_back(l);
    }
    return out;
  }
  std::vector<Lease> all() const {
    std::vector<Lease> out;
    out.reserve(leases_.size());
    for (const auto& [id, l] : leases_) out.push_back(l);
    return out;
  }
  void erase_subtree(uint32_t subtree_id) {
    for (auto it = leases_.begin(); it != leases_.end();) {
      it = it->second.subtree_id == subtree_id ? leases_.erase(it)
                                               : std::next(it);
    }
  }
  size_t size() const { return leases_.size(); }

 private:
  std::map<uint64_t, Lease> leases_;
};

// Lease-log record kinds (durable, replicated to chain peers).
enum class LeaseLogKind : uint8_t {
  Grant = 1,
  Release = 2,
  Expire = 3,
  MigrateIn = 4,
};

// Append-only lease log in NVM. The manager appends a record, then mirrors
// the same framed bytes positionally into chain peers' mirror regions
// before completing the grant.
class LeaseLog {
 public:
  LeaseLog(sim::EventLoop& loop, media::MediaStore& media,
           media::RegionId region)
      : loop_(loop), media_(media), region_(region) {}

  media::RegionId region() const { return region_; }
  uint64_t tail() const { return tail_; }

  struct Appended {
    uint64_t offset;
    Bytes framed;
    sim::Time persist_at;
  };
  Result<Appended> append(const proto::LeaseRecord& rec);

  // All valid records from offset 0 (manager log or a mirror of one).
  static std::vector<proto::LeaseRecord> scan(const media::MediaStore& media,
                                              media::RegionId region);
  // Live leases after replaying records in order.
  static LeaseTable replay_live(const std::vector<proto::LeaseRecord>& recs);

  // Remounts the append cursor after a restart.
  void mount() { tail_ = scan_tail(media_, region_); }
  static uint64_t scan_tail(const media::MediaStore& media,
                            media::RegionId region);

 private:
  sim::EventLoop& loop_;
  media::MediaStore& media_;
  media::RegionId region_;
  uint64_t tail_ = 0;
};

}  // namespace cfs::coherence
