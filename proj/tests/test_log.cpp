/*
 * test_log.cpp
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fs/fs_image.hpp"
#include "log/coalesce.hpp"
#include "log/update_log.hpp"
#include "sim/rng.hpp"

using namespace cfs;
using namespace cfs::log;

namespace {

Bytes fill(size_t n, uint8_t v) { return Bytes(n, v); }

struct LogFixture {
  sim::EventLoop loop;
  media::LatencyModel lat;
  media::MediaStore media;
  media::RegionId region;
  UpdateLog log;

  explicit LogFixture(uint64_t cap = 1 << 20)
      : media(loop, lat),
        region(media.create_region("n1", media::Tier::NVM, "p0/log", cap)),
        log(loop, media, region, "n1/p0", 1) {
    log.format();
  }
};

LogEntry make_write(uint64_t seq, fs::InodeNum ino, uint64_t off, Bytes data,
                    uint64_t mtime = 0) {
  LogEntry e;
  e.seq = seq;
  e.txn = seq;
  e.kind = OpKind::Write;
  e.inode = ino;
  e.offset = off;
  e.mtime = mtime;
  e.payload = std::move(data);
  return e;
}

uint64_t replay_hash(const std::vector<LogEntry>& entries) {
  fs::FsImage img;
  for (const auto& e : entries) img.apply(e);
  return img.state_hash();
}

// Random operation sequences over a handful of inodes, used by the
// coalescing soundness property.
std::vector<LogEntry> random_ops(sim::Rng& rng, size_t count) {
  std::vector<LogEntry> out;
  uint64_t seq = 0;
  fs::InodeNum next_ino = 100;
  std::vector<fs::InodeNum> live;
  auto mtime = [&] { return 1000 + seq; };
  while (out.size() < count) {
    seq++;
    uint64_t pick = rng.below(10);
    if (pick < 2 || live.empty()) {
      fs::InodeNum ino = next_ino++;
      LogEntry e;
      e.seq = seq;
      e.txn = seq;
      e.kind = OpKind::Create;
      e.inode = ino;
      e.mtime = mtime();
      e.payload = LogEntry::pack_create(
          {fs::kRootInode, fs::Attrs{0644, 1, 1},
           "f" + std::to_string(ino)});
      out.push_back(e);
      live.push_back(ino);
    } else if (pick < 7) {
      fs::InodeNum ino = live[rng.below(live.size())];
      uint64_t off = rng.below(300);
      out.push_back(make_write(seq, ino, off,
                               fill(rng.below(200) + 1,
                                    static_cast<uint8_t>(rng.below(256))),
                               mtime()));
    } else if (pick < 8) {
      fs::InodeNum ino = live[rng.below(live.size())];
      LogEntry e;
      e.seq = seq;
      e.txn = seq;
      e.kind = OpKind::Truncate;
      e.inode = ino;
      e.offset = rng.below(400);
      e.mtime = mtime();
      out.push_back(e);
    } else if (pick < 9) {
      fs::InodeNum ino = live[rng.below(live.size())];
      LogEntry e;
      e.seq = seq;
      e.txn = seq;
      e.kind = OpKind::SetAttr;
      e.inode = ino;
      e.mtime = mtime();
      e.payload = LogEntry::pack_setattr(
          fs::Attrs{static_cast<uint32_t>(0600 + rng.below(0100)), 1, 1});
      out.push_back(e);
    } else {
      size_t idx = rng.below(live.size());
      fs::InodeNum ino = live[idx];
      LogEntry e;
      e.seq = seq;
      e.txn = seq;
      e.kind = OpKind::Unlink;
      e.inode = ino;
      e.mtime = mtime();
      e.payload = LogEntry::pack_unlink(
          {fs::kRootInode, "f" + std::to_string(ino)});
      out.push_back(e);
      live.erase(live.begin() + idx);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("entry codec round trip") {
  LogEntry e = make_write(7, 42, 512, fill(1000, 0x3C), 12345);
  e.subtree = 3;
  Bytes enc = encode_entry(e);
  CHECK(enc.size() == entry_media_size(1000));
  size_t consumed = 0;
  auto d = decode_entry(enc.data(), enc.size(), &consumed);
  REQUIRE(d.ok());
  CHECK(consumed == enc.size());
  CHECK(d->seq == 7);
  CHECK(d->inode == 42);
  CHECK(d->offset == 512);
  CHECK(d->mtime == 12345);
  CHECK(d->subtree == 3);
  CHECK(d->payload == e.payload);

  // A flipped byte breaks the checksum.
  enc[70] ^= 0xFF;
  CHECK(!decode_entry(enc.data(), enc.size(), &consumed).ok());
}

TEST_CASE("structured payloads round trip") {
  LogEntry e;
  e.kind = OpKind::Rename;
  e.payload = LogEntry::pack_rename({10, 11, 12, "old", "new"});
  auto args = e.rename_args();
  REQUIRE(args.ok());
  CHECK(args->src_parent == 10);
  CHECK(args->dst_parent == 11);
  CHECK(args->replaced_ino == 12);
  CHECK(args->src_name == "old");
  CHECK(args->dst_name == "new");
}

TEST_CASE("append assigns sequential seqs and advances the tail") {
  LogFixture fx;
  auto s1 = fx.log.append(OpKind::Write, 5, 0, fill(1024, 1), 0, 10);
  REQUIRE(s1.ok());
  CHECK(*s1 == 1);
  CHECK(fx.log.used() == entry_media_size(1024));
  auto s2 = fx.log.append(OpKind::Write, 5, 1024, fill(100, 2), 0, 11);
  REQUIRE(s2.ok());
  CHECK(*s2 == 2);
  CHECK(fx.log.tail_seq() == 2);
}

TEST_CASE("hashtable points at the latest write for a range") {
  LogFixture fx;
  REQUIRE(fx.log.append(OpKind::Write, 5, 0, fill(4096, 1), 0, 10).ok());
  REQUIRE(fx.log.append(OpKind::Write, 5, 0, fill(4096, 2), 0, 11).ok());
  auto hits = fx.log.index().lookup(5, 0, 4096);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].seq == 2);
  auto bytes = fx.media.read(fx.region, hits[0].payload_region_off, 16);
  REQUIRE(bytes.ok());
  CHECK(*bytes == fill(16, 2));
}

TEST_CASE("hashtable agrees with a linear scan on random workloads") {
  sim::Rng rng(2024);
  for (int round = 0; round < 20; round++) {
    LogFixture fx;
    for (int i = 0; i < 60; i++) {
      fs::InodeNum ino = 3 + rng.below(4);
      uint64_t kind = rng.below(10);
      if (kind < 7) {
        fx.log.append(OpKind::Write, ino, rng.below(4000),
                      fill(rng.below(500) + 1, 0xAA), 0, i);
      } else if (kind < 9) {
        LogEntry dummy;
        fx.log.append(OpKind::Truncate, ino, rng.below(4000), {}, 0, i);
      } else {
        fx.log.append(OpKind::Unlink, ino, 0,
                      LogEntry::pack_unlink({fs::kRootInode, "x"}), 0, i);
      }
    }
    CHECK(fx.log.index_matches_linear_scan());
  }
}

TEST_CASE("log reports full when an entry cannot fit") {
  LogFixture fx(4096 + 64);  // tiny: superblock + 4KB data area
  auto big = fx.log.append(OpKind::Write, 5, 0, fill(3000, 1), 0, 0);
  REQUIRE(big.ok());
  auto more = fx.log.append(OpKind::Write, 5, 0, fill(3000, 2), 0, 1);
  CHECK(more.error() == Err::LogFull);
  auto oversized = fx.log.append(OpKind::Write, 5, 0, fill(5000, 2), 0, 1);
  CHECK(oversized.error() == Err::CapacityExceeded);
}

TEST_CASE("ring wraps and survives mount after digestion cycles") {
  LogFixture fx(64 + 4096);
  uint64_t total_appended = 0;
  for (int cycle = 0; cycle < 10; cycle++) {
    std::vector<uint64_t> seqs;
    for (int i = 0; i < 3; i++) {
      auto s = fx.log.append(OpKind::Write, 7, i * 100, fill(700, uint8_t(cycle)), 0, cycle);
      REQUIRE(s.ok());
      seqs.push_back(*s);
      total_appended++;
    }
    // Replicate + digest everything so the head chases the tail.
    fx.log.set_replicated_seq(seqs.back());
    fx.log.advance_head(seqs.back());
  }
  CHECK(fx.log.tail_seq() == total_appended);
  CHECK(fx.log.used() == 0);

  // Append a little more, then remount from media and compare.
  REQUIRE(fx.log.append(OpKind::Write, 7, 0, fill(128, 0x5A), 0, 99).ok());
  fx.loop.run_until(fx.log.last_append_deadline() + 1);
  UpdateLog twin(fx.loop, fx.media, fx.region, "n1/p0", 1);
  auto mounted = twin.mount();
  REQUIRE(mounted.ok());
  CHECK(*mounted == 1);
  auto entries = twin.entries(1, ~0ull);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].seq == total_appended + 1);
  CHECK(entries[0].payload == fill(128, 0x5A));
}

TEST_CASE("mount recovers only persisted prefix after a crash") {
  LogFixture fx;
  REQUIRE(fx.log.append(OpKind::Write, 5, 0, fill(100, 1), 0, 0).ok());
  REQUIRE(fx.log.append(OpKind::Write, 5, 100, fill(100, 2), 0, 1).ok());
  REQUIRE(fx.log.append(OpKind::Write, 5, 200, fill(100, 3), 0, 2).ok());
  // Superblock write happened at format time and is persisted; entry
  // writes are still in flight. Keep the first entry only.
  uint64_t unpersisted = fx.media.unpersisted_count("n1");
  REQUIRE(unpersisted >= 3);
  REQUIRE(fx.media.crash("n1", media::CutSpec::global_index(
                                   unpersisted - 2)).ok());
  UpdateLog twin(fx.loop, fx.media, fx.region, "n1/p0", 1);
  auto mounted = twin.mount();
  REQUIRE(mounted.ok());
  CHECK(*mounted == 1);
  CHECK(twin.entries(1, ~0ull)[0].payload == fill(100, 1));
}

TEST_CASE("watermark order is enforced") {
  LogFixture fx;
  REQUIRE(fx.log.append(OpKind::Write, 5, 0, fill(10, 1), 0, 0).ok());
  REQUIRE(fx.log.append(OpKind::Write, 5, 10, fill(10, 2), 0, 1).ok());
  fx.log.set_replicated_seq(1);
  CHECK(fx.log.digested_seq() <= fx.log.replicated_seq());
  CHECK(fx.log.replicated_seq() <= fx.log.tail_seq());
  fx.log.advance_head(1);
  CHECK(fx.log.digested_seq() == 1);
}

TEST_CASE("coalesce drops a fully overwritten write") {
  auto a = make_write(1, 9, 0, fill(4096, 1));
  auto b = make_write(2, 9, 0, fill(4096, 2));
  auto out = coalesce({a, b});
  REQUIRE(out.size() == 1);
  CHECK(out[0].seq == 2);
  CHECK(out[0].payload == fill(4096, 2));
}

TEST_CASE("coalesce trims a partially overwritten write") {
  auto a = make_write(1, 9, 0, fill(100, 1));
  auto b = make_write(2, 9, 50, fill(100, 2));
  auto out = coalesce({a, b});
  REQUIRE(out.size() == 2);
  CHECK(out[0].offset == 0);
  CHECK(out[0].payload == fill(50, 1));
  CHECK(out[1].offset == 50);
  CHECK(out[1].payload == fill(100, 2));
  CHECK(replay_hash(out) == replay_hash({a, b}));
}

TEST_CASE("create-write-unlink cancels to nothing") {
  LogEntry c;
  c.seq = 1;
  c.txn = 1;
  c.kind = OpKind::Create;
  c.inode = 50;
  c.payload = LogEntry::pack_create({fs::kRootInode, {}, "tmp"});
  auto w = make_write(2, 50, 0, fill(100, 7));
  LogEntry u;
  u.seq = 3;
  u.txn = 3;
  u.kind = OpKind::Unlink;
  u.inode = 50;
  u.payload = LogEntry::pack_unlink({fs::kRootInode, "tmp"});
  auto out = coalesce({c, w, u});
  CHECK(out.empty());
}

TEST_CASE("disjoint writes are unchanged") {
  auto a = make_write(1, 9, 0, fill(100, 1));
  auto b = make_write(2, 9, 200, fill(100, 2));
  auto c = make_write(3, 10, 0, fill(100, 3));
  auto out = coalesce({a, b, c});
  REQUIRE(out.size() == 3);
  CHECK(replay_hash(out) == replay_hash({a, b, c}));
}

TEST_CASE("truncate shadows earlier bytes beyond the new size") {
  auto a = make_write(1, 9, 0, fill(200, 1));
  LogEntry t;
  t.seq = 2;
  t.txn = 2;
  t.kind = OpKind::Truncate;
  t.inode = 9;
  t.offset = 100;
  auto b = make_write(3, 9, 150, fill(20, 2));
  auto out = coalesce({a, t, b});
  // The first write must lose its [100, 200) half.
  uint64_t kept_first = 0;
  for (const auto& e : out) {
    if (e.seq == 1) kept_first += e.payload.size();
  }
  CHECK(kept_first == 100);
  CHECK(replay_hash(out) == replay_hash({a, t, b}));
}

TEST_CASE("coalescing is sound over random sequences") {
  // Oracle: applying the coalesced list to a fresh image equals applying
  // the original, for generated sequences up to length 50.
  sim::Rng rng(77);
  for (int round = 0; round < 200; round++) {
    auto ops = random_ops(rng, 1 + rng.below(50));
    auto squeezed = coalesce(ops);
    uint64_t raw_bytes = 0, squeezed_bytes = 0;
    for (const auto& e : ops) raw_bytes += e.payload.size();
    for (const auto& e : squeezed) squeezed_bytes += e.payload.size();
    CHECK(squeezed_bytes <= raw_bytes);
    REQUIRE(replay_hash(squeezed) == replay_hash(ops));
  }
}

TEST_CASE("coalesced extraction is never larger than the raw slice") {
  sim::Rng rng(3);
  for (int round = 0; round < 50; round++) {
    auto ops = random_ops(rng, 30);
    uint64_t raw = 0, squeezed = 0;
    for (const auto& e : ops) raw += entry_media_size(e.payload.size());
    for (const auto& e : coalesce(ops)) squeezed += entry_media_size(e.payload.size());
    CHECK(squeezed <= raw);
  }
}
