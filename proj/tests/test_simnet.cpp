/*
 * test_simnet.cpp
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

#include "net/simnet.hpp"
#include "sim/rng.hpp"

using namespace cfs;
using namespace cfs::net;

namespace {

struct Fixture {
  sim::EventLoop loop;
  media::LatencyModel lat;
  media::MediaStore media;
  sim::TraceRecorder trace;
  SimNet net;

  Fixture()
      : media(loop, lat), net(loop, media, trace, NetConfig{}) {
    net.add_endpoint("n1/p0", "n1");
    net.add_endpoint("n2/k0", "n2");
  }
};

Bytes fill(size_t n, uint8_t v) { return Bytes(n, v); }

}  // namespace

TEST_CASE("rdma write lands in a registered region and completes durable") {
  Fixture fx;
  media::RegionId r = fx.media.create_region("n2", media::Tier::NVM, "mlog", 4096);
  fx.net.register_region("n2/k0", r, "n1/p0");

  auto fut = fx.net.rdma_write("n1/p0", "n2/k0", r, 0, fill(128, 0x7E), "SEGMENT_WRITE");
  fx.loop.run_until(100'000);
  REQUIRE(fut.ready());
  REQUIRE(fut.peek().ok());
  auto back = fx.media.read(r, 0, 128);
  REQUIRE(back.ok());
  CHECK(*back == fill(128, 0x7E));
  // Completion implies durability at the destination.
  CHECK(fut.peek().value().persist_at <= fx.loop.now());
  CHECK(fx.media.all_persisted(r));
}

TEST_CASE("rdma write to an unregistered region is rejected") {
  Fixture fx;
  media::RegionId r = fx.media.create_region("n2", media::Tier::NVM, "mlog", 4096);
  auto fut = fx.net.rdma_write("n1/p0", "n2/k0", r, 0, fill(16, 1), "SEGMENT_WRITE");
  CHECK(fut.ready());
  CHECK(fut.peek().error() == Err::UnregisteredRegion);
}

TEST_CASE("two in-flight remote writes cut to a prefix across net and media") {
  // Enumerate every cut of W1,W2: never W2 without W1.
  for (uint64_t k = 0; k <= 2; k++) {
    Fixture fx;
    media::RegionId r =
        fx.media.create_region("n2", media::Tier::NVM, "mlog", 4096);
    fx.net.register_region("n2/k0", r, "n1/p0");
    fx.net.rdma_write("n1/p0", "n2/k0", r, 0, fill(64, 1), "SEGMENT_WRITE");
    fx.net.rdma_write("n1/p0", "n2/k0", r, 64, fill(64, 2), "SEGMENT_WRITE");
    // Let both deliveries happen but not the persist deadlines.
    fx.loop.run_until(NetConfig{}.rdma_deliver_ns + 10);
    REQUIRE(fx.media.unpersisted_count("n2") == 2);
    REQUIRE(fx.media.crash("n2", media::CutSpec::global_index(k)).ok());
    auto back = fx.media.read(r, 0, 128);
    REQUIRE(back.ok());
    Bytes expect(128, 0);
    if (k >= 1) std::fill(expect.begin(), expect.begin() + 64, 1);
    if (k >= 2) std::fill(expect.begin() + 64, expect.end(), 2);
    CHECK(*back == expect);
  }
}

TEST_CASE("echo rpc returns the payload") {
  Fixture fx;
  fx.net.set_rpc_handler("n2/k0", [](const EndpointId&, const std::string&,
                                     const Bytes& req) {
    sim::Future<Result<Bytes>> f;
    f.fulfill(Bytes(req));
    return f;
  });
  auto fut = fx.net.rpc("n1/p0", "n2/k0", "ECHO", fill(32, 9));
  fx.loop.run_until(1'000'000);
  REQUIRE(fut.ready());
  REQUIRE(fut.peek().ok());
  CHECK(fut.peek().value() == fill(32, 9));
}

TEST_CASE("rpc after rdma_write on one connection sees the written bytes") {
  Fixture fx;
  media::RegionId r = fx.media.create_region("n2", media::Tier::NVM, "mlog", 4096);
  fx.net.register_region("n2/k0", r, "n1/p0");

  Bytes observed;
  fx.net.set_rpc_handler("n2/k0", [&](const EndpointId&, const std::string&,
                                      const Bytes&) {
    auto data = fx.media.read(r, 0, 64);
    REQUIRE(data.ok());
    observed = *data;
    sim::Future<Result<Bytes>> f;
    f.fulfill(Bytes{1});
    return f;
  });

  fx.net.rdma_write("n1/p0", "n2/k0", r, 0, fill(64, 0xCD), "SEGMENT_WRITE");
  auto fut = fx.net.rpc("n1/p0", "n2/k0", "CHAIN_STEP", fill(8, 0));
  fx.loop.run_until(10'000'000);
  REQUIRE(fut.ready());
  REQUIRE(fut.peek().ok());
  CHECK(observed == fill(64, 0xCD));
}

TEST_CASE("rpc to a crashed node fails after the timeout") {
  Fixture fx;
  fx.net.set_node_alive("n2", false);
  auto fut = fx.net.rpc("n1/p0", "n2/k0", "ACQUIRE", fill(4, 0));
  fx.loop.run_until(NetConfig{}.rpc_timeout_ns - 2);
  CHECK(!fut.ready());
  fx.loop.run_until(NetConfig{}.rpc_timeout_ns + 2);
  REQUIRE(fut.ready());
  CHECK(fut.peek().error() == Err::DstFailed);
}

TEST_CASE("per connection delivery is FIFO") {
  Fixture fx;
  std::vector<uint8_t> seen;
  fx.net.set_rpc_handler("n2/k0", [&](const EndpointId&, const std::string&,
                                      const Bytes& req) {
    seen.push_back(req[0]);
    sim::Future<Result<Bytes>> f;
    f.fulfill(Bytes{});
    return f;
  });
  sim::Rng rng(7);
  for (uint8_t i = 0; i < 50; i++) {
    fx.net.rpc("n1/p0", "n2/k0", "SEQ", Bytes{i});
  }
  fx.loop.run_until(1'000'000'000);
  REQUIRE(seen.size() == 50);
  for (uint8_t i = 0; i < 50; i++) CHECK(seen[i] == i);
}

TEST_CASE("read into requester cache delivers data then prefetch") {
  Fixture fx;
  media::RegionId cache =
      fx.media.create_region("n1", media::Tier::DRAM, "rcache", 1 << 20);
  fx.net.register_region("n1/p0", cache, "n2/k0");

  // Server returns a whole 4KB block; the client asked for 1KB at offset 100.
  Bytes block(4096, 0);
  for (size_t i = 0; i < block.size(); i++) block[i] = static_cast<uint8_t>(i);
  fx.net.set_rpc_handler("n2/k0", [&](const EndpointId&, const std::string&,
                                      const Bytes&) {
    sim::Future<Result<Bytes>> f;
    f.fulfill(Bytes(block));
    return f;
  });

  auto fut = fx.net.read_into_requester_cache("n1/p0", "n2/k0", "REMOTE_READ",
                                              Bytes{1}, cache, 0, 1024);
  fx.loop.run_until_quiesce(1'000'000'000);
  REQUIRE(fut.ready());
  REQUIRE(fut.peek().ok());
  CHECK(fut.peek().value().bytes == 1024);
  CHECK(fut.peek().value().prefetch_bytes == 4096 - 1024);

  // At completion, the requested bytes are present.
  auto first = fx.media.read(cache, 0, 1024);
  REQUIRE(first.ok());
  CHECK(*first == Bytes(block.begin(), block.begin() + 1024));

  // After the prefetch trailer lands, the whole block is present.
  fx.loop.run_until(2'000'000'000);
  auto whole = fx.media.read(cache, 0, 4096);
  REQUIRE(whole.ok());
  CHECK(*whole == block);
}

TEST_CASE("negative read reply writes nothing into the cache") {
  Fixture fx;
  media::RegionId cache =
      fx.media.create_region("n1", media::Tier::DRAM, "rcache", 4096);
  fx.net.register_region("n1/p0", cache, "n2/k0");
  fx.net.set_rpc_handler("n2/k0", [](const EndpointId&, const std::string&,
                                     const Bytes&) {
    sim::Future<Result<Bytes>> f;
    f.fulfill(Err::ENOENT_);
    return f;
  });
  auto fut = fx.net.read_into_requester_cache("n1/p0", "n2/k0", "REMOTE_READ",
                                              Bytes{1}, cache, 0, 4096);
  fx.loop.run_until(1'000'000'000);
  REQUIRE(fut.ready());
  CHECK(fut.peek().error() == Err::ENOENT_);
  auto body = fx.media.read(cache, 0, 4096);
  CHECK(*body == Bytes(4096, 0));
}

TEST_CASE("identical runs produce identical traces") {
  auto run = [] {
    Fixture fx;
    fx.net.set_rpc_handler("n2/k0", [](const EndpointId&, const std::string&,
                                       const Bytes& req) {
      sim::Future<Result<Bytes>> f;
      f.fulfill(Bytes(req));
      return f;
    });
    sim::Rng rng(99);
    for (int i = 0; i < 20; i++) {
      fx.net.rpc("n1/p0", "n2/k0", "T" + std::to_string(rng.below(3)),
                 fill(rng.below(64) + 1, 1));
    }
    fx.loop.run_until(1'000'000'000);
    return fx.trace.hash();
  };
  CHECK(run() == run());
}
