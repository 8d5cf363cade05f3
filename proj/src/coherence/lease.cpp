/*
 * lease.cpp
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

#include "coherence/lease.hpp"

#include <cstring>

#include "util/crc32c.hpp"

namespace cfs::coherence {

namespace {
constexpr uint32_t kLeaseLogMagic = 0x474C4C43;  // "CLLG"
constexpr size_t kHeaderSize = 16;
}  // namespace

Result<LeaseLog::Appended> LeaseLog::append(const proto::LeaseRecord& rec) {
  Bytes payload = rec.encode();
  Bytes framed;
  ByteWriter w(framed);
  w.u32(kLeaseLogMagic);
  w.u8(1);
  w.u8(0);
  w.u16(0);
  w.u32(static_cast<uint32_t>(payload.size()));
  CFS_ASSERT(framed.size() == 12);
  uint32_t crc = crc32c(framed.data(), 12);
  crc = crc32c(payload.data(), payload.size(), crc);
  w.u32(crc);
  w.raw(payload);
  w.pad_to(8);

  if (tail_ + framed.size() > media_.capacity(region_)) return Err::ENOSPC_;
  uint64_t at = tail_;
  auto t = media_.write_persistent(region_, at, framed);
  if (!t.ok()) return t.error();
  tail_ += framed.size();
  return Appended{at, std::move(framed), t->persist_at};
}

std::vector<proto::LeaseRecord> LeaseLog::scan(const media::MediaStore& media,
                                               media::RegionId region) {
  std::vector<proto::LeaseRecord> out;
  uint64_t cap = media.capacity(region);
  uint64_t pos = 0;
  while (pos + kHeaderSize <= cap) {
    auto head = media.read(region, pos, kHeaderSize);
    CFS_ASSERT(head.ok());
    ByteReader r(*head);
    if (r.u32() != kLeaseLogMagic) break;
    if (r.u8() != 1) break;
    r.u8();
    r.u16();
    uint32_t plen = r.u32();
    uint64_t total = (kHeaderSize + plen + 7) & ~uint64_t{7};
    if (pos + total > cap) break;
    auto whole = media.read(region, pos, kHeaderSize + plen);
    CFS_ASSERT(whole.ok());
    uint32_t want = 0;
    std::memcpy(&want, whole->data() + 12, 4);
    uint32_t got = crc32c(whole->data(), 12);
    got = crc32c(whole->data() + kHeaderSize, plen, got);
    if (got != want) break;
    Bytes payload(whole->begin() + kHeaderSize, whole->end());
    ByteReader pr(payload);
    out.push_back(proto::LeaseRecord::decode_from(pr));
    if (!pr.ok()) {
      out.pop_back();
      break;
    }
    pos += total;
  }
  return out;
}

uint64_t LeaseLog::scan_tail(const media::MediaStore& media,
                             media::RegionId region) {
  uint64_t cap = media.capacity(region);
  uint64_t pos = 0;
  while (pos + kHeaderSize <= cap) {
    auto head = media.read(region, pos, kHeaderSize);
    CFS_ASSERT(head.ok());
    ByteReader r(*head);
    if (r.u32() != kLeaseLogMagic) break;
    r.u8();
    r.u8();
    r.u16();
    uint32_t plen = r.u32();
    uint64_t total = (kHeaderSize + plen + 7) & ~uint64_t{7};
    auto whole = media.read(region, pos, kHeaderSize + plen);
    if (!whole.ok()) break;
    uint32_t want = 0;
    std::memcpy(&want, whole->data() + 12, 4);
    uint32_t got = crc32c(whole->data(), 12);
    got = crc32c(whole->data() + kHeaderSize, plen, got);
    if (got != want) break;
    pos += total;
  }
  return pos;
}

LeaseTable LeaseLog::replay_live(const std::vector<proto::LeaseRecord>& recs) {
  LeaseTable table;
  for (const auto& r : recs) {
    switch (static_cast<LeaseLogKind>(r.kind)) {
      case LeaseLogKind::Grant:
      case LeaseLogKind::MigrateIn:
        table.insert(Lease::from_record(r));
        break;
      case LeaseLogKind::Release:
      case LeaseLogKind::Expire:
        table.erase(r.lease_id);
        break;
    }
  }
  return table;
}

}  // namespace cfs::coherence
