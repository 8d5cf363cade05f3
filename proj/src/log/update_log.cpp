/*
 * update_log.cpp
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

#include "log/update_log.hpp"

#include <algorithm>

#include "util/crc32c.hpp"

namespace cfs::log {

void LogIndex::insert(fs::InodeNum ino, uint64_t begin, uint64_t end,
                      uint64_t seq, uint64_t payload_region_off) {
  if (begin >= end) return;
  auto& m = map_[ino];
  // Split or remove older coverage overlapping [begin, end).
  auto it = m.lower_bound(begin);
  if (it != m.begin()) {
    auto prev = std::prev(it);
    if (prev->second.end > begin) {
      // prev overlaps: [pb, pe) -> keep [pb, begin), maybe re-add tail.
      Rng old = prev->second;
      uint64_t pb = prev->first;
      prev->second.end = begin;
      if (old.end > end) {
        m[end] = Rng{old.end, old.seq,
                     old.payload_region_off + (end - pb)};
      }
      if (prev->second.end <= pb) m.erase(prev);
    }
  }
  it = m.lower_bound(begin);
  while (it != m.end() && it->first < end) {
    if (it->second.end <= end) {
      it = m.erase(it);
    } else {
      Rng old = it->second;
      uint64_t ob = it->first;
      m.erase(it);
      m[end] = Rng{old.end, old.seq, old.payload_region_off + (end - ob)};
      break;
    }
  }
  m[begin] = Rng{end, seq, payload_region_off};
}

void LogIndex::truncate(fs::InodeNum ino, uint64_t size, uint64_t seq) {
  (void)seq;
  auto mit = map_.find(ino);
  if (mit == map_.end()) return;
  auto& m = mit->second;
  auto it = m.lower_bound(size);
  if (it != m.begin()) {
    auto prev = std::prev(it);
    if (prev->second.end > size) prev->second.end = size;
    if (prev->second.end <= prev->first) m.erase(prev);
  }
  m.erase(m.lower_bound(size), m.end());
}

void LogIndex::drop_inode(fs::InodeNum ino) { map_.erase(ino); }

void LogIndex::clear_through(uint64_t seq) {
  for (auto mit = map_.begin(); mit != map_.end();) {
    auto& m = mit->second;
    for (auto it = m.begin(); it != m.end();) {
      if (it->second.seq <= seq) {
        it = m.erase(it);
      } else {
        ++it;
      }
    }
    mit = m.empty() ? map_.erase(mit) : std::next(mit);
  }
}

std::vector<LogIndex::Hit> LogIndex::lookup(fs::InodeNum ino, uint64_t begin,
                                            uint64_t end) const {
  std::vector<Hit> out;
  auto mit = map_.find(ino);
  if (mit == map_.end()) return out;
  const auto& m = mit->second;
  auto it = m.upper_bound(begin);
  if (it != m.begin()) {
    auto prev = std::prev(it);
    if (prev->second.end > begin) it = prev;
  }
  for (; it != m.end() && it->first < end; ++it) {
    uint64_t b = std::max(begin, it->first);
    uint64_t e = std::min(end, it->second.end);
    if (b < e) {
      out.push_back(Hit{b, e, it->second.seq,
                        it->second.payload_region_off + (b - it->first)});
    }
  }
  return out;
}

std::map<fs::InodeNum, std::vector<LogIndex::Hit>> LogIndex::dump() const {
  std::map<fs::InodeNum, std::vector<Hit>> out;
  for (const auto& [ino, m] : map_) {
    for (const auto& [b, r] : m) {
      out[ino].push_back(Hit{b, r.end, r.seq, r.payload_region_off});
    }
  }
  return out;
}

UpdateLog::UpdateLog(sim::EventLoop& loop, media::MediaStore& media,
                     media::RegionId region, std::string owner,
                     uint64_t owner_token)
    : loop_(loop),
      media_(media),
      region_(region),
      owner_(std::move(owner)),
      owner_token_(owner_token) {
  CFS_ASSERT(media_.capacity(region_) > kLogSuperblockSize);
  data_cap_ = media_.capacity(region_) - kLogSuperblockSize;
}

media::WriteTicket UpdateLog::put_superblock(media::MediaStore& media,
                                             media::RegionId region,
                                             uint64_t head_off,
                                             uint64_t head_seq,
                                             uint64_t digested_seq) {
  Bytes sb;
  ByteWriter w(sb);
  w.u32(kLogSuperMagic);
  w.u8(1);
  w.u8(0);
  w.u16(0);
  w.u64(media.capacity(region) - kLogSuperblockSize);
  w.u64(head_off);
  w.u64(head_seq);
  w.u64(digested_seq);
  w.pad_to(60);
  w.u32(crc32c(sb.data(), 60));
  auto t = media.write_persistent(region, 0, sb);
  CFS_ASSERT(t.ok());
  return t.value();
}

void UpdateLog::write_superblock() {
  auto t = put_superblock(media_, region_, head_off_, head_seq_, digested_seq_);
  last_deadline_ = t.persist_at;
}

void UpdateLog::format() {
  head_off_ = tail_off_ = 0;
  head_seq_ = 1;
  tail_seq_ = 0;
  digested_seq_ = 0;
  replicated_seq_ = 0;
  used_ = 0;
  live_.clear();
  index_.clear();
  write_superblock();
}

uint64_t UpdateLog::free_space() const {
  // Reserve room for one wrap sentinel and keep the ring from filling
  // completely (a full ring would be ambiguous with an empty one).
  uint64_t reserved = 16;
  return data_cap_ > used_ + reserved ? data_cap_ - used_ - reserved : 0;
}

void UpdateLog::set_replicated_seq(uint64_t s) {
  CFS_ASSERT(s >= replicated_seq_);
  CFS_ASSERT(s <= tail_seq_);
  replicated_seq_ = s;
  CFS_ASSERT(digested_seq_ <= replicated_seq_);
}

Result<uint64_t> UpdateLog::append(OpKind kind, fs::InodeNum ino,
                                   uint64_t offset, Bytes payload,
                                   uint32_t subtree, uint64_t mtime,
                                   uint64_t txn) {
  LogEntry e;
  e.seq = tail_seq_ + 1;
  e.txn = txn == 0 ? next_txn() : txn;
  e.kind = kind;
  e.flags = kFlagTxnLast;
  e.inode = ino;
  e.offset = offset;
  e.mtime = mtime;
  e.subtree = subtree;
  e.payload = std::move(payload);

  Bytes encoded = encode_entry(e);
  uint64_t need = encoded.size();
  if (need + 16 > data_cap_) return Err::CapacityExceeded;  // oversized entry
  uint64_t space_to_end = data_cap_ - tail_off_;
  bool wraps = space_to_end < need;
  uint64_t need_total = need + (wraps ? space_to_end : 0);
  if (need_total > free_space()) return Err::LogFull;

  if (wraps) {
    // Wrap: sentinel if it fits, then continue at ring offset 0. The
    // skipped gap stays accounted as used until the head passes it.
    if (space_to_end >= 8) {
      Bytes sentinel;
      ByteWriter w(sentinel);
      w.u32(kWrapMagic);
      w.u32(static_cast<uint32_t>(e.seq));
      auto t = media_.write_persistent(region_, ring_to_region(tail_off_),
                                       sentinel);
      CFS_ASSERT(t.ok());
    }
    used_ += space_to_end;
    tail_off_ = 0;
  }

  auto t = media_.write_persistent(region_, ring_to_region(tail_off_), encoded);
  if (!t.ok()) return t.error();
  last_deadline_ = t->persist_at;

  live_.push_back(LiveEntry{e.seq, tail_off_, need, subtree});
  if (kind == OpKind::Write) {
    index_.insert(ino, e.offset, e.offset + e.payload.size(), e.seq,
                  ring_to_region(tail_off_) + kEntryHeaderSize);
  } else if (kind == OpKind::Truncate) {
    index_.truncate(ino, e.offset, e.seq);
  } else if (kind == OpKind::Unlink) {
    index_.drop_inode(ino);
  }
  tail_off_ += need;
  if (tail_off_ == data_cap_) tail_off_ = 0;
  used_ += need;
  tail_seq_ = e.seq;
  return e.seq;
}

std::vector<LogEntry> UpdateLog::entries(uint64_t from_seq,
                                         uint64_t to_seq) const {
  std::vector<LogEntry> out;
  for (const auto& le : live_) {
    if (le.seq < from_seq || le.seq > to_seq) continue;
    auto raw = media_.read(region_, ring_to_region(le.off), le.media_size);
    CFS_ASSERT(raw.ok());
    size_t consumed = 0;
    auto e = decode_entry(raw->data(), raw->size(), &consumed);
    CFS_ASSERT_MSG(e.ok(), "corrupt live entry seq=%llu",
                   static_cast<unsigned long long>(le.seq));
    out.push_back(std::move(e.value()));
  }
  return out;
}

std::vector<LogEntry> UpdateLog::entries_for_subtree(uint32_t subtree,
                                                     uint64_t from_seq,
                                                     uint64_t to_seq) const {
  std::vector<LogEntry> out;
  for (auto& e : entries(from_seq, to_seq)) {
    if (e.subtree == subtree) out.push_back(std::move(e));
  }
  return out;
}

void UpdateLog::advance_head(uint64_t seq) {
  CFS_ASSERT(seq <= replicated_seq_);
  while (!live_.empty() && live_.front().seq <= seq) {
    LiveEntry le = live_.front();
    live_.pop_front();
    if (le.off != head_off_) {
      // Wrap gap between the head and this entry is reclaimed with it.
      used_ -= (le.off - head_off_ + data_cap_) % data_cap_;
      head_off_ = le.off;
    }
    used_ -= le.media_size;
    head_off_ = le.off + le.media_size;
    if (head_off_ == data_cap_) head_off_ = 0;
    head_seq_ = le.seq + 1;
  }
  if (live_.empty() && head_off_ != tail_off_) {
    // Only a trailing wrap gap can separate head and tail now.
    used_ -= (tail_off_ - head_off_ + data_cap_) % data_cap_;
    head_off_ = tail_off_;
  }
  digested_seq_ = std::max(digested_seq_, seq);
  CFS_ASSERT(digested_seq_ <= replicated_seq_);
  index_.clear_through(seq);
  write_superblock();
}

bool UpdateLog::index_matches_linear_scan() const {
  // Oracle: replay live WRITE/TRUNCATE/UNLINK entries in order into a fresh
  // index and compare coverage.
  LogIndex oracle;
  for (const auto& le : live_) {
    auto raw = media_.read(region_, ring_to_region(le.off), le.media_size);
    CFS_ASSERT(raw.ok());
    size_t consumed = 0;
    auto e = decode_entry(raw->data(), raw->size(), &consumed);
    CFS_ASSERT(e.ok());
    if (e->kind == OpKind::Write) {
      oracle.insert(e->inode, e->offset, e->offset + e->payload.size(), e->seq,
                    ring_to_region(le.off) + kEntryHeaderSize);
    } else if (e->kind == OpKind::Truncate) {
      oracle.truncate(e->inode, e->offset, e->seq);
    } else if (e->kind == OpKind::Unlink) {
      oracle.drop_inode(e->inode);
    }
  }
  auto a = oracle.dump();
  auto b = index_.dump();
  if (a.size() != b.size()) return false;
  for (auto ait = a.begin(), bit = b.begin(); ait != a.end(); ++ait, ++bit) {
    if (ait->first != bit->first) return false;
    if (ait->second.size() != bit->second.size()) return false;
    for (size_t i = 0; i < ait->second.size(); i++) {
      const auto& x = ait->second[i];
      const auto& y = bit->second[i];
      if (x.begin != y.begin || x.end != y.end || x.seq != y.seq ||
          x.payload_region_off != y.payload_region_off) {
        return false;
      }
    }
  }
  return true;
}

Result<LogScan> UpdateLog::scan_region(const media::MediaStore& media,
                                       media::RegionId region) {
  uint64_t region_cap = media.capacity(region);
  if (region_cap <= kLogSuperblockSize) return Err::ChecksumFailure;
  uint64_t data_cap = region_cap - kLogSuperblockSize;

  auto sb_raw = media.read(region, 0, kLogSuperblockSize);
  if (!sb_raw.ok()) return sb_raw.error();
  ByteReader r(*sb_raw);
  if (r.u32() != kLogSuperMagic) return Err::ChecksumFailure;
  if (r.u8() != 1) return Err::ChecksumFailure;
  r.u8();
  r.u16();
  uint64_t cap = r.u64();
  LogScan scan;
  scan.head_off = r.u64();
  scan.head_seq = r.u64();
  scan.digested_seq = r.u64();
  uint32_t want = 0;
  {
    Bytes sb = *sb_raw;
    std::memcpy(&want, sb.data() + 60, 4);
    if (crc32c(sb.data(), 60) != want) return Err::ChecksumFailure;
  }
  if (cap != data_cap || scan.head_off >= data_cap) return Err::ChecksumFailure;

  // Forward scan from the head: accept checksummed entries with contiguous
  // seqs; anything else ends the log.
  uint64_t pos = scan.head_off;
  uint64_t expected = scan.head_seq;
  scan.tail_off = pos;
  scan.tail_seq = scan.head_seq - 1;
  for (;;) {
    uint64_t space = data_cap - pos;
    if (space < 8) {
      pos = 0;
      continue;
    }
    auto probe = media.read(region, kLogSuperblockSize + pos, 8);
    CFS_ASSERT(probe.ok());
    ByteReader pr(*probe);
    uint32_t magic = pr.u32();
    if (magic == kWrapMagic) {
      uint32_t seq_lo = pr.u32();
      if (seq_lo != static_cast<uint32_t>(expected)) break;
      pos = 0;
      continue;
    }
    if (magic != kEntryMagic || space < kEntryHeaderSize) break;
    auto head = media.read(region, kLogSuperblockSize + pos, kEntryHeaderSize);
    CFS_ASSERT(head.ok());
    uint32_t plen = 0;
    std::memcpy(&plen, head->data() + 48, 4);
    uint64_t total = entry_media_size(plen);
    if (total > space) break;
    auto raw = media.read(region, kLogSuperblockSize + pos, total);
    CFS_ASSERT(raw.ok());
    size_t consumed = 0;
    auto e = decode_entry(raw->data(), raw->size(), &consumed);
    if (!e.ok() || e->seq != expected) break;
    scan.live.push_back(std::move(e.value()));
    scan.live_offsets.push_back(pos);
    scan.tail_seq = expected;
    pos += total;
    if (pos == data_cap) pos = 0;
    scan.tail_off = pos;
    expected++;
    if (scan.live.size() > data_cap / kEntryHeaderSize + 2) break;  // safety
  }
  return scan;
}

Result<uint64_t> UpdateLog::mount() {
  auto scan = scan_region(media_, region_);
  if (!scan.ok()) return scan.error();
  head_off_ = scan->head_off;
  head_seq_ = scan->head_seq;
  digested_seq_ = scan->digested_seq;
  tail_off_ = scan->tail_off;
  tail_seq_ = scan->tail_seq;
  replicated_seq_ = digested_seq_;
  live_.clear();
  index_.clear();
  used_ = 0;
  for (size_t i = 0; i < scan->live.size(); i++) {
    const LogEntry& e = scan->live[i];
    uint64_t off = scan->live_offsets[i];
    uint64_t sz = entry_media_size(e.payload.size());
    live_.push_back(LiveEntry{e.seq, off, sz, e.subtree});
    index_entry(e, off);
  }
  used_ = (tail_off_ - head_off_ + data_cap_) % data_cap_;
  return live_.size();
}

void UpdateLog::index_entry(const LogEntry& e, uint64_t ring_off) {
  if (e.kind == OpKind::Write) {
    index_.insert(e.inode, e.offset, e.offset + e.payload.size(), e.seq,
                  ring_to_region(ring_off) + kEntryHeaderSize);
  } else if (e.kind == OpKind::Truncate) {
    index_.truncate(e.inode, e.offset, e.seq);
  } else if (e.kind == OpKind::Unlink) {
    index_.drop_inode(e.inode);
  }
}

}  // namespace cfs::log
