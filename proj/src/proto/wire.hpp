/*
 * wire.hpp
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

#include <string>
#include <vector>

#include "fs/types.hpp"
#include "util/bytes.hpp"
#include "util/result.hpp"

// Message payload codecs for the lease, replication, digest, cluster and
// read protocols. Trace tags are defined next to each message.
namespace cfs::proto {

// Lease protocol tags: ACQUIRE, GRANT, REVOKE, RELEASE, FORWARD, MIGRATE.
// Replication tags: SEGMENT_WRITE, CHAIN_STEP, CHAIN_ACK, EVICT, EVICT_ACK.
// Cluster tags: HEARTBEAT, EPOCH, WHO_MANAGES, MGR_TAKEOVER, REJOIN_FETCH.

struct AcquireReq {
  std::string scope;
  bool subtree = false;
  bool write = false;
  uint32_t subtree_id = 0;
  std::string holder;        // logical process name
  std::string holder_libfs;  // endpoint of the current instance
  std::string home_kernfs;   // kernfs that can relay a revoke
  uint32_t uid = 0, gid = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(scope);
    w.u8(subtree);
    w.u8(write);
    w.u32(subtree_id);
    w.str(holder);
    w.str(holder_libfs);
    w.str(home_kernfs);
    w.u32(uid);
    w.u32(gid);
    return b;
  }
  static Result<AcquireReq> decode(const Bytes& b) {
    ByteReader r(b);
    AcquireReq m;
    m.scope = r.str();
    m.subtree = r.u8();
    m.write = r.u8();
    m.subtree_id = r.u32();
    m.holder = r.str();
    m.holder_libfs = r.str();
    m.home_kernfs = r.str();
    m.uid = r.u32();
    m.gid = r.u32();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct GrantRep {
  uint64_t lease_id = 0;
  uint64_t expiry = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u64(lease_id);
    w.u64(expiry);
    return b;
  }
  static Result<GrantRep> decode(const Bytes& b) {
    ByteReader r(b);
    GrantRep m;
    m.lease_id = r.u64();
    m.expiry = r.u64();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct LeaseMsg {  // REVOKE / RELEASE / RENEW
  uint64_t lease_id = 0;
  uint32_t subtree_id = 0;
  std::string scope;
  bool subtree = false;
  std::string holder;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u64(lease_id);
    w.u32(subtree_id);
    w.str(scope);
    w.u8(subtree);
    w.str(holder);
    return b;
  }
  static Result<LeaseMsg> decode(const Bytes& b) {
    ByteReader r(b);
    LeaseMsg m;
    m.lease_id = r.u64();
    m.subtree_id = r.u32();
    m.scope = r.str();
    m.subtree = r.u8();
    m.holder = r.str();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct WhoManagesReq {
  uint32_t subtree_id = 0;
  std::string requester;  // kernfs id

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u32(subtree_id);
    w.str(requester);
    return b;
  }
  static Result<WhoManagesReq> decode(const Bytes& b) {
    ByteReader r(b);
    WhoManagesReq m;
    m.subtree_id = r.u32();
    m.requester = r.str();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct WhoManagesRep {
  std::string manager;
  uint64_t expiry = 0;  // management assignment expiry

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(manager);
    w.u64(expiry);
    return b;
  }
  static Result<WhoManagesRep> decode(const Bytes& b) {
    ByteReader r(b);
    WhoManagesRep m;
    m.manager = r.str();
    m.expiry = r.u64();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

// One serialized lease (migration tables, takeover replay replies).
struct LeaseRecord {
  uint8_t kind = 0;  // lease-log record kind (grant/release/expire/migrate)
  uint64_t lease_id = 0;
  uint32_t subtree_id = 0;
  std::string scope;
  bool subtree = false;
  bool write = false;
  std::string holder;
  std::string holder_libfs;
  std::string home_kernfs;
  uint64_t expiry = 0;

  void encode_into(ByteWriter& w) const {
    w.u8(kind);
    w.u64(lease_id);
    w.u32(subtree_id);
    w.str(scope);
    w.u8(subtree);
    w.u8(write);
    w.str(holder);
    w.str(holder_libfs);
    w.str(home_kernfs);
    w.u64(expiry);
  }
  static LeaseRecord decode_from(ByteReader& r) {
    LeaseRecord m;
    m.kind = r.u8();
    m.lease_id = r.u64();
    m.subtree_id = r.u32();
    m.scope = r.str();
    m.subtree = r.u8();
    m.write = r.u8();
    m.holder = r.str();
    m.holder_libfs = r.str();
    m.home_kernfs = r.str();
    m.expiry = r.u64();
    return m;
  }
  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    encode_into(w);
    return b;
  }
};

struct MigrateTable {
  uint32_t subtree_id = 0;
  std::string from;
  std::vector<LeaseRecord> leases;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u32(subtree_id);
    w.str(from);
    w.u32(static_cast<uint32_t>(leases.size()));
    for (const auto& l : leases) l.encode_into(w);
    return b;
  }
  static Result<MigrateTable> decode(const Bytes& b) {
    ByteReader r(b);
    MigrateTable m;
    m.subtree_id = r.u32();
    m.from = r.str();
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; i++) m.leases.push_back(LeaseRecord::decode_from(r));
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct OpenMirrorReq {
  std::string log_owner;  // logical process name
  uint32_t subtree_id = 0;
  uint64_t capacity = 0;
  bool reset = false;
  uint64_t base_seq = 0;      // mirror-space: next entry is base_seq + 1
  uint64_t log_seq = 0;       // log-space frontier already covered
  uint64_t ring_off = 0;  // where the next frame will land after a reset
  std::string writer_endpoint;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(log_owner);
    w.u32(subtree_id);
    w.u64(capacity);
    w.u8(reset);
    w.u64(base_seq);
    w.u64(log_seq);
    w.u64(ring_off);
    w.str(writer_endpoint);
    return b;
  }
  static Result<OpenMirrorReq> decode(const Bytes& b) {
    ByteReader r(b);
    OpenMirrorReq m;
    m.log_owner = r.str();
    m.subtree_id = r.u32();
    m.capacity = r.u64();
    m.reset = r.u8();
    m.base_seq = r.u64();
    m.log_seq = r.u64();
    m.ring_off = r.u64();
    m.writer_endpoint = r.str();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct ChainStep {
  std::string log_owner;
  uint32_t subtree_id = 0;
  uint64_t covers_from = 0, covers_to = 0;
  uint32_t uid = 0, gid = 0;
  std::vector<std::pair<uint64_t, uint64_t>> writes;  // (ring_off, len)
  // Remaining chain after the receiver: (kernfs endpoint, mirror region).
  std::vector<std::pair<std::string, uint64_t>> rest;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(log_owner);
    w.u32(subtree_id);
    w.u64(covers_from);
    w.u64(covers_to);
    w.u32(uid);
    w.u32(gid);
    w.u32(static_cast<uint32_t>(writes.size()));
    for (auto& [o, l] : writes) {
      w.u64(o);
      w.u64(l);
    }
    w.u32(static_cast<uint32_t>(rest.size()));
    for (auto& [k, rgn] : rest) {
      w.str(k);
      w.u64(rgn);
    }
    return b;
  }
  static Result<ChainStep> decode(const Bytes& b) {
    ByteReader r(b);
    ChainStep m;
    m.log_owner = r.str();
    m.subtree_id = r.u32();
    m.covers_from = r.u64();
    m.covers_to = r.u64();
    m.uid = r.u32();
    m.gid = r.u32();
    uint32_t nw = r.u32();
    for (uint32_t i = 0; i < nw; i++) {
      uint64_t o = r.u64(), l = r.u64();
      m.writes.emplace_back(o, l);
    }
    uint32_t nr = r.u32();
    for (uint32_t i = 0; i < nr; i++) {
      std::string k = r.str();
      uint64_t rgn = r.u64();
      m.rest.emplace_back(k, rgn);
    }
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct EvictReq {
  std::string log_owner;
  uint32_t subtree_id = 0;
  uint64_t through_seq = 0;
  uint32_t uid = 0, gid = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(log_owner);
    w.u32(subtree_id);
    w.u64(through_seq);
    w.u32(uid);
    w.u32(gid);
    return b;
  }
  static Result<EvictReq> decode(const Bytes& b) {
    ByteReader r(b);
    EvictReq m;
    m.log_owner = r.str();
    m.subtree_id = r.u32();
    m.through_seq = r.u64();
    m.uid = r.u32();
    m.gid = r.u32();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct EvictRep {
  uint64_t digested_through = 0;
  uint64_t state_hash = 0;  // testing aid: per-subtree state hash after digest

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u64(digested_through);
    w.u64(state_hash);
    return b;
  }
  static Result<EvictRep> decode(const Bytes& b) {
    ByteReader r(b);
    EvictRep m;
    m.digested_through = r.u64();
    m.state_hash = r.u64();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct LocalDigestReq {
  std::string log_owner;
  uint64_t log_region = 0;
  uint64_t from_seq = 0, through_seq = 0;
  uint32_t uid = 0, gid = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(log_owner);
    w.u64(log_region);
    w.u64(from_seq);
    w.u64(through_seq);
    w.u32(uid);
    w.u32(gid);
    return b;
  }
  static Result<LocalDigestReq> decode(const Bytes& b) {
    ByteReader r(b);
    LocalDigestReq m;
    m.log_owner = r.str();
    m.log_region = r.u64();
    m.from_seq = r.u64();
    m.through_seq = r.u64();
    m.uid = r.u32();
    m.gid = r.u32();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct ResizeReq {  // RESIZE_RESERVE / RESIZE_COMMIT / RESIZE_ABORT
  std::string log_owner;
  uint32_t subtree_id = 0;
  uint64_t new_capacity = 0;
  uint64_t base_seq = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(log_owner);
    w.u32(subtree_id);
    w.u64(new_capacity);
    w.u64(base_seq);
    return b;
  }
  static Result<ResizeReq> decode(const Bytes& b) {
    ByteReader r(b);
    ResizeReq m;
    m.log_owner = r.str();
    m.subtree_id = r.u32();
    m.new_capacity = r.u64();
    m.base_seq = r.u64();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct InlineDigest {
  std::string log_owner;
  uint32_t subtree_id = 0;
  uint32_t uid = 0, gid = 0;
  Bytes entries;  // concatenated encoded log entries

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(log_owner);
    w.u32(subtree_id);
    w.u32(uid);
    w.u32(gid);
    w.u32(static_cast<uint32_t>(entries.size()));
    w.raw(entries);
    return b;
  }
  static Result<InlineDigest> decode(const Bytes& b) {
    ByteReader r(b);
    InlineDigest m;
    m.log_owner = r.str();
    m.subtree_id = r.u32();
    m.uid = r.u32();
    m.gid = r.u32();
    uint32_t n = r.u32();
    m.entries = r.raw(n);
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct ResolveReq {
  std::string path;
  uint32_t uid = 0, gid = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.str(path);
    w.u32(uid);
    w.u32(gid);
    return b;
  }
  static Result<ResolveReq> decode(const Bytes& b) {
    ByteReader r(b);
    ResolveReq m;
    m.path = r.str();
    m.uid = r.u32();
    m.gid = r.u32();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct ReadReq {
  fs::InodeNum ino = 0;
  uint64_t off = 0, len = 0;
  uint32_t uid = 0, gid = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u64(ino);
    w.u64(off);
    w.u64(len);
    w.u32(uid);
    w.u32(gid);
    return b;
  }
  static Result<ReadReq> decode(const Bytes& b) {
    ByteReader r(b);
    ReadReq m;
    m.ino = r.u64();
    m.off = r.u64();
    m.len = r.u64();
    m.uid = r.u32();
    m.gid = r.u32();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct EpochNotify {
  uint64_t epoch = 0;
  std::string node;
  bool failed = false;  // failure vs recovery event

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u64(epoch);
    w.str(node);
    w.u8(failed);
    return b;
  }
  static Result<EpochNotify> decode(const Bytes& b) {
    ByteReader r(b);
    EpochNotify m;
    m.epoch = r.u64();
    m.node = r.str();
    m.failed = r.u8();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

struct RejoinFetchReq {
  uint64_t from_epoch = 0;

  Bytes encode() const {
    Bytes b;
    ByteWriter w(b);
    w.u64(from_epoch);
    return b;
  }
  static Result<RejoinFetchReq> decode(const Bytes& b) {
    ByteReader r(b);
    RejoinFetchReq m;
    m.from_epoch = r.u64();
    if (!r.ok()) return Err::ParseError;
    return m;
  }
};

}  // namespace cfs::proto
