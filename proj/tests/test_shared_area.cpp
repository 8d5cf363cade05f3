/*
 * test_shared_area.cpp
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

#include "kernfs/shared_area.hpp"
#include "sim/rng.hpp"

using namespace cfs;
using namespace cfs::kernfs;
using log::LogEntry;
using log::OpKind;

namespace {

Bytes fill(size_t n, uint8_t v) { return Bytes(n, v); }

struct AreaFixture {
  sim::EventLoop loop;
  media::LatencyModel lat;
  media::MediaStore media;
  SharedArea area;

  explicit AreaFixture(Role role = Role::CacheReplica,
                       SharedAreaConfig cfg = {})
      : media(loop, lat), area(loop, media, "n1", "n1/k0", cfg) {
    area.set_subtree_role(1, role);
    area.bootstrap_dir(fs::kRootInode, 2, "shard0", 1);
  }
};

LogEntry entry_create(uint64_t seq, fs::InodeNum ino, fs::InodeNum parent,
                      const std::string& name, uint64_t txn,
                      fs::Attrs attrs = {0644, 1, 1}) {
  LogEntry e;
  e.seq = seq;
  e.txn = txn;
  e.kind = OpKind::Create;
  e.inode = ino;
  e.subtree = 1;
  e.mtime = seq;
  e.payload = LogEntry::pack_create({parent, attrs, name});
  return e;
}

LogEntry entry_write(uint64_t seq, fs::InodeNum ino, uint64_t off, Bytes data,
                     uint64_t txn) {
  LogEntry e;
  e.seq = seq;
  e.txn = txn;
  e.kind = OpKind::Write;
  e.inode = ino;
  e.offset = off;
  e.subtree = 1;
  e.mtime = seq;
  e.payload = std::move(data);
  return e;
}

const fs::Cred kWriter{1, 1};

}  // namespace

TEST_CASE("digest of create plus write lands in the shared area") {
  AreaFixture fx;
  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "f", 11),
      entry_write(2, 100, 0, fill(1000, 0x6B), 11),
  };
  auto r = fx.area.apply_batch(kWriter, 11, batch, 1);
  REQUIRE(r.ok());
  fx.loop.run_until(*r + 1);

  auto m = fx.area.meta(100);
  REQUIRE(m != nullptr);
  CHECK(m->size == 1000);
  auto looked = fx.area.lookup(2, "f");
  REQUIRE(looked.ok());
  CHECK(*looked == 100);
  auto hits = fx.area.read(100, 0, 1000);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].tier == PlaceTier::HotNvm);
  CHECK(hits[0].data == fill(1000, 0x6B));
}

TEST_CASE("unauthorized writer leaves the shared area unchanged") {
  AreaFixture fx;
  std::vector<LogEntry> ok_batch{
      entry_create(1, 100, 2, "f", 21, fs::Attrs{0600, 1, 1}),
      entry_write(2, 100, 0, fill(100, 1), 21),
  };
  REQUIRE(fx.area.apply_batch(kWriter, 21, ok_batch, 1).ok());
  uint64_t before = fx.area.state_hash();

  // A different uid has no write permission on the 0600 file.
  std::vector<LogEntry> bad{entry_write(3, 100, 0, fill(100, 2), 22)};
  auto r = fx.area.apply_batch(fs::Cred{2, 2}, 22, bad, 1);
  CHECK(!r.ok());
  CHECK(r.error() == Err::PermissionDenied);
  CHECK(fx.area.state_hash() == before);
  CHECK(!fx.area.txn_applied(22));
}

TEST_CASE("re-digesting an applied transaction is a no-op") {
  AreaFixture fx;
  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "f", 31),
      entry_write(2, 100, 0, fill(64, 9), 31),
  };
  REQUIRE(fx.area.apply_batch(kWriter, 31, batch, 1).ok());
  uint64_t h = fx.area.state_hash();
  REQUIRE(fx.area.apply_batch(kWriter, 31, batch, 1).ok());
  CHECK(fx.area.state_hash() == h);
}

TEST_CASE("recovery replays only committed transactions") {
  AreaFixture fx;
  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "f", 41),
      entry_write(2, 100, 0, fill(512, 0x11), 41),
  };
  auto r = fx.area.apply_batch(kWriter, 41, batch, 1);
  REQUIRE(r.ok());
  fx.loop.run_until(*r + 1);  // batch durable
  uint64_t clean = fx.area.state_hash();

  REQUIRE(fx.media.crash("n1", media::CutSpec::persisted_only()).ok());
  REQUIRE(fx.media.recover("n1").ok());
  auto recs = fx.area.recover_from_journal();
  REQUIRE(recs.ok());
  CHECK(fx.area.state_hash() == clean);
  CHECK(fx.area.txn_applied(41));
}

TEST_CASE("digest idempotence across every crash cut point") {
  // Oracle: the clean-run hash. Every cut during digestion, followed by
  // recovery and re-digestion of the same batches, must converge to it.
  auto run_batches = [](SharedArea& area) {
    std::vector<LogEntry> b1{
        entry_create(1, 100, 2, "a", 51),
        entry_write(2, 100, 0, fill(300, 1), 51),
    };
    std::vector<LogEntry> b2{
        entry_write(3, 100, 100, fill(300, 2), 52),
        entry_create(4, 101, 2, "b", 52),
        entry_write(5, 101, 0, fill(64, 3), 52),
    };
    auto r1 = area.apply_batch(kWriter, 51, b1, 1);
    auto r2 = area.apply_batch(kWriter, 52, b2, 1);
    REQUIRE(r1.ok());
    REQUIRE(r2.ok());
  };

  uint64_t clean_hash;
  uint64_t cut_domain;
  {
    AreaFixture fx;
    run_batches(fx.area);
    fx.loop.run_until(1'000'000'000);
    clean_hash = fx.area.state_hash();
    // Fresh fixture to measure the unpersisted write count at crash time.
    AreaFixture probe;
    run_batches(probe.area);
    cut_domain = probe.media.unpersisted_count("n1");
  }
  REQUIRE(cut_domain > 0);

  for (uint64_t k = 0; k <= cut_domain; k++) {
    AreaFixture fx;
    run_batches(fx.area);
    REQUIRE(fx.media.crash("n1", media::CutSpec::global_index(k)).ok());
    REQUIRE(fx.media.recover("n1").ok());
    REQUIRE(fx.area.recover_from_journal().ok());
    // Re-digest the same batches (idempotent), then compare.
    run_batches(fx.area);
    fx.loop.run_until(1'000'000'000);
    REQUIRE(fx.area.state_hash() == clean_hash);
  }
}

TEST_CASE("lru migration moves cold extents to ssd") {
  SharedAreaConfig cfg;
  cfg.hot_capacity = 8192;  // force migration quickly
  AreaFixture fx(Role::CacheReplica, cfg);

  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "a", 61),
      entry_write(2, 100, 0, fill(4096, 1), 61),
      entry_create(3, 101, 2, "b", 61),
      entry_write(4, 101, 0, fill(4096, 2), 61),
  };
  REQUIRE(fx.area.apply_batch(kWriter, 61, batch, 1).ok());
  // Touch inode 101 so 100 is the LRU victim.
  fx.area.read(101, 0, 16);
  CHECK(fx.area.hot_live_bytes() == 8192);

  auto rep = fx.area.migrate_lru();
  CHECK(rep.extents_moved >= 1);
  CHECK(!rep.enospc);
  CHECK(fx.area.hot_live_bytes() <=
        static_cast<uint64_t>(8192 * cfg.low_water));

  auto hits = fx.area.read(100, 0, 4096);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].tier == PlaceTier::ColdSsd);
  CHECK(hits[0].data == fill(4096, 1));

  // Migration state must survive recovery.
  fx.loop.run_until(1'000'000'000);
  uint64_t before = fx.area.state_hash();
  REQUIRE(fx.media.crash("n1", media::CutSpec::persisted_only()).ok());
  REQUIRE(fx.area.recover_from_journal().ok());
  CHECK(fx.area.state_hash() == before);
  auto again = fx.area.read(100, 0, 4096);
  REQUIRE(again.size() == 1);
  CHECK(again[0].tier == PlaceTier::ColdSsd);
  CHECK(again[0].data == fill(4096, 1));
}

TEST_CASE("empty lru migration is a no-op") {
  AreaFixture fx;
  auto rep = fx.area.migrate_lru();
  CHECK(rep.extents_moved == 0);
  CHECK(rep.bytes_moved == 0);
}

TEST_CASE("reserve replica keeps a third-level nvm copy with ssd primary") {
  SharedAreaConfig cfg;
  cfg.reserve_capacity = 8192;
  AreaFixture fx(Role::ReserveReplica, cfg);

  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "a", 71),
      entry_write(2, 100, 0, fill(4096, 1), 71),
      entry_create(3, 101, 2, "b", 71),
      entry_write(4, 101, 0, fill(4096, 2), 71),
  };
  REQUIRE(fx.area.apply_batch(kWriter, 71, batch, 1).ok());
  auto hits = fx.area.read(100, 0, 4096);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].tier == PlaceTier::ReserveNvm);

  // Evicting third-level data falls back to the SSD copy, not data loss.
  fx.area.read(101, 0, 16);
  auto rep = fx.area.migrate_lru();
  CHECK(rep.extents_moved >= 1);
  auto after = fx.area.read(100, 0, 4096);
  REQUIRE(after.size() == 1);
  CHECK(after[0].tier == PlaceTier::HotSsd);
  CHECK(after[0].data == fill(4096, 1));
}

TEST_CASE("invalidation drops content until repopulated") {
  AreaFixture fx;
  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "a", 81),
      entry_write(2, 100, 0, fill(256, 1), 81),
  };
  REQUIRE(fx.area.apply_batch(kWriter, 81, batch, 1).ok());
  fx.area.invalidate_inode(100);
  CHECK(fx.area.pending_invalidation(100));
  CHECK(!fx.area.covers(100, 0, 256));
  CHECK(fx.area.meta(100) != nullptr);  // metadata retained

  REQUIRE(fx.area.repopulate(100, 0, fill(256, 9)).ok());
  CHECK(!fx.area.pending_invalidation(100));
  CHECK(fx.area.covers(100, 0, 256));
  auto hits = fx.area.read(100, 0, 256);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].data == fill(256, 9));
}

TEST_CASE("epoch bitmaps record written inodes and serialize") {
  AreaFixture fx;
  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "a", 91),
      entry_write(2, 100, 0, fill(10, 1), 91),
  };
  REQUIRE(fx.area.apply_batch(kWriter, 91, batch, 3).ok());
  const auto& bm = fx.area.epoch_bitmaps();
  REQUIRE(bm.count(3));
  CHECK(bm.at(3).count(100));
  CHECK(bm.at(3).count(2));  // parent directory was written too

  Bytes ser = fx.area.serialize_bitmaps(0);
  auto parsed = SharedArea::parse_bitmaps(ser);
  REQUIRE(parsed.ok());
  CHECK(parsed->at(3) == bm.at(3));

  fx.area.drop_epoch(3);
  CHECK(fx.area.epoch_bitmaps().count(3) == 0);
}

TEST_CASE("two areas digesting the same batches hash equal") {
  AreaFixture a, b;
  std::vector<LogEntry> batch{
      entry_create(1, 100, 2, "a", 95),
      entry_write(2, 100, 0, fill(333, 5), 95),
      entry_write(3, 100, 100, fill(50, 6), 95),
  };
  REQUIRE(a.area.apply_batch(kWriter, 95, batch, 1).ok());
  REQUIRE(b.area.apply_batch(kWriter, 95, batch, 1).ok());
  CHECK(a.area.state_hash() == b.area.state_hash());
  CHECK(a.area.state_hash_subtree(1) == b.area.state_hash_subtree(1));
}
