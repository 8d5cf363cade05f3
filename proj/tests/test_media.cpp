/*
 * test_media.cpp
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

#include <cstdio>

#include "media/media.hpp"
#include "sim/event_loop.hpp"

using namespace cfs;
using namespace cfs::media;

namespace {

Bytes fill(size_t n, uint8_t v) { return Bytes(n, v); }

// Independent shadow model: a region's durable contents must equal zeroes
// plus an in-order prefix of the issued writes.
struct ShadowRegion {
  Bytes image;
  std::vector<std::pair<uint64_t, Bytes>> writes;

  explicit ShadowRegion(uint64_t cap) : image(cap, 0) {}
  void issue(uint64_t off, const Bytes& data) { writes.emplace_back(off, data); }
  Bytes replay_prefix(size_t k) const {
    Bytes img = image;
    for (size_t i = 0; i < k && i < writes.size(); i++) {
      std::copy(writes[i].second.begin(), writes[i].second.end(),
                img.begin() + writes[i].first);
    }
    return img;
  }
};

}  // namespace

TEST_CASE("single persisted write survives a crash") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 4096);

  auto t = media.write_persistent(r, 0, fill(64, 0xAB));
  REQUIRE(t.ok());
  loop.run_until(t->persist_at + 1);

  auto rep = media.crash("n1", CutSpec::persisted_only());
  REQUIRE(rep.ok());
  CHECK(rep->unpersisted == 0);
  REQUIRE(media.recover("n1").ok());

  auto back = media.read(r, 0, 64);
  REQUIRE(back.ok());
  CHECK(*back == fill(64, 0xAB));
}

TEST_CASE("crash cut points preserve a prefix, never a gap") {
  // Oracle first: enumerate every cut point for three in-flight writes and
  // compare against the shadow replay of the matching issue prefix.
  for (uint64_t k = 0; k <= 3; k++) {
    sim::EventLoop loop;
    LatencyModel lat;
    MediaStore media(loop, lat);
    RegionId r = media.create_region("n1", Tier::NVM, "log", 4096);
    ShadowRegion shadow(4096);

    Bytes w1 = fill(100, 1), w2 = fill(100, 2), w3 = fill(100, 3);
    REQUIRE(media.write_persistent(r, 0, w1).ok());
    REQUIRE(media.write_persistent(r, 50, w2).ok());
    REQUIRE(media.write_persistent(r, 200, w3).ok());
    shadow.issue(0, w1);
    shadow.issue(50, w2);
    shadow.issue(200, w3);

    // Crash before any persist deadline.
    auto rep = media.crash("n1", CutSpec::global_index(k));
    REQUIRE(rep.ok());
    CHECK(rep->unpersisted == 3);
    CHECK(rep->kept == k);
    REQUIRE(media.recover("n1").ok());

    auto back = media.read(r, 0, 4096);
    REQUIRE(back.ok());
    CHECK(*back == shadow.replay_prefix(k));
  }
}

TEST_CASE("writes beyond capacity are rejected") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 4096);
  auto bad = media.write_persistent(r, 4096, fill(1, 0));
  CHECK(!bad.ok());
  CHECK(bad.error() == Err::CapacityExceeded);
  auto unknown = media.write_persistent(999, 0, fill(1, 0));
  CHECK(unknown.error() == Err::UnknownRegion);
}

TEST_CASE("reads see issued but unpersisted data") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 4096);
  REQUIRE(media.write_persistent(r, 10, fill(8, 0x5A)).ok());
  // No clock advance: the write is visible but not durable.
  auto back = media.read(r, 10, 8);
  REQUIRE(back.ok());
  CHECK(*back == fill(8, 0x5A));
  CHECK(!media.all_persisted(r));
}

TEST_CASE("untouched ranges read as zeroes") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "x", 1024);
  auto back = media.read(r, 100, 50);
  REQUIRE(back.ok());
  CHECK(*back == fill(50, 0));
  CHECK(!media.read(r, 1000, 100).ok());
}

TEST_CASE("read across two writes concatenates latest values") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "x", 1024);
  ShadowRegion shadow(1024);

  Bytes a = fill(100, 0x11), b = fill(100, 0x22), c = fill(60, 0x33);
  REQUIRE(media.write_persistent(r, 0, a).ok());
  REQUIRE(media.write_persistent(r, 100, b).ok());
  REQUIRE(media.write_persistent(r, 80, c).ok());  // overlaps both
  shadow.issue(0, a);
  shadow.issue(100, b);
  shadow.issue(80, c);

  auto back = media.read(r, 0, 200);
  REQUIRE(back.ok());
  Bytes expect = shadow.replay_prefix(3);
  CHECK(*back == Bytes(expect.begin(), expect.begin() + 200));
}

TEST_CASE("dram is erased by a crash") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId d = media.create_region("n1", Tier::DRAM, "cache", 1024);
  REQUIRE(media.write_persistent(d, 0, fill(16, 0xFF)).ok());
  loop.run_until(1000000);
  REQUIRE(media.crash("n1", CutSpec::all()).ok());
  REQUIRE(media.recover("n1").ok());
  auto back = media.read(d, 0, 16);
  REQUIRE(back.ok());
  CHECK(*back == fill(16, 0));
}

TEST_CASE("cut after one of three in-flight writes keeps only the first") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 4096);
  REQUIRE(media.write_persistent(r, 0, fill(10, 1)).ok());
  REQUIRE(media.write_persistent(r, 10, fill(10, 2)).ok());
  REQUIRE(media.write_persistent(r, 20, fill(10, 3)).ok());
  REQUIRE(media.crash("n1", CutSpec::global_index(1)).ok());
  REQUIRE(media.recover("n1").ok());
  auto back = media.read(r, 0, 30);
  REQUIRE(back.ok());
  Bytes expect = fill(10, 1);
  expect.resize(30, 0);
  CHECK(*back == expect);
}

TEST_CASE("recovering an unknown node fails") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  CHECK(!media.recover("ghost").ok());
  CHECK(!media.crash("ghost", CutSpec::all()).ok());
}

TEST_CASE("persisted writes can never be dropped by a cut") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 4096);
  auto t1 = media.write_persistent(r, 0, fill(10, 1));
  REQUIRE(t1.ok());
  loop.run_until(t1->persist_at + 1);
  REQUIRE(media.write_persistent(r, 10, fill(10, 2)).ok());
  // PersistedOnly drops the second write but must keep the first.
  auto rep = media.crash("n1", CutSpec::persisted_only());
  REQUIRE(rep.ok());
  CHECK(rep->unpersisted == 1);
  auto back = media.read(r, 0, 20);
  Bytes expect = fill(10, 1);
  expect.resize(20, 0);
  CHECK(*back == expect);
}

TEST_CASE("ssd requires 4KB aligned IO") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId s = media.create_region("n1", Tier::SSD, "cold", 1 << 20);
  CHECK(media.write_persistent(s, 0, fill(4096, 1)).ok());
  CHECK(media.write_persistent(s, 100, fill(4096, 1)).error() == Err::Misaligned);
  CHECK(media.write_persistent(s, 4096, fill(100, 1)).error() == Err::Misaligned);
  CHECK(media.read(s, 0, 4096).ok());
  CHECK(media.read(s, 1, 4095).error() == Err::Misaligned);
}

TEST_CASE("default latency ordering matches the storage hierarchy") {
  LatencyModel lat;
  CHECK(lat.read_order_sane());
  CHECK(lat.read_ns(Tier::DRAM, Locality::Local) <
        lat.read_ns(Tier::NVM, Locality::Local));
  CHECK(lat.read_ns(Tier::NVM, Locality::Local) <
        lat.read_ns(Tier::NVM, Locality::Numa));
  CHECK(lat.read_ns(Tier::NVM, Locality::Numa) <
        lat.read_ns(Tier::NVM, Locality::Kernel));
  CHECK(lat.read_ns(Tier::NVM, Locality::Kernel) <
        lat.read_ns(Tier::NVM, Locality::Rdma));
  CHECK(lat.read_ns(Tier::NVM, Locality::Rdma) <
        lat.read_ns(Tier::SSD, Locality::Local));
}

TEST_CASE("persistence deadlines are FIFO per region") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 1 << 20);
  sim::Time prev = 0;
  for (int i = 0; i < 20; i++) {
    auto t = media.write_persistent(r, i * 64, fill(64, 1));
    REQUIRE(t.ok());
    CHECK(t->persist_at > prev);
    prev = t->persist_at;
  }
}

TEST_CASE("region file round trip with sidecar journal") {
  sim::EventLoop loop;
  LatencyModel lat;
  MediaStore media(loop, lat);
  RegionId r = media.create_region("n1", Tier::NVM, "log", 8192);
  REQUIRE(media.write_persistent(r, 128, fill(256, 0x42)).ok());
  loop.run_until(1'000'000);

  std::string path = "test_region.bin";
  REQUIRE(media.save_region(r, path).ok());
  auto loaded = media.load_region("n2", path);
  REQUIRE(loaded.ok());
  auto back = media.read(*loaded, 128, 256);
  REQUIRE(back.ok());
  CHECK(*back == fill(256, 0x42));
  CHECK(media.tier(*loaded) == Tier::NVM);
  CHECK(media.capacity(*loaded) == 8192);
  std::remove(path.c_str());
  std::remove((path + ".journal").c_str());
}
