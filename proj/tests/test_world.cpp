/*
 * test_world.cpp
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

#include "cluster/cluster_manager.hpp"
#include "fs/libfs.hpp"
#include "kernfs/kernfs.hpp"
#include "world/world.hpp"

using namespace cfs;
using fs::LibFs;

namespace {

const char* kTwoNodeConfig = R"(
[node n1]
[node n2]
[node n3]
[chain /shard0]
replicas = n1, n2
[defaults]
log_capacity = 4MB
read_cache = 1MB
)";

struct Fx {
  cluster::ClusterConfig cfg;
  std::unique_ptr<world::World> w;

  explicit Fx(const char* text = kTwoNodeConfig,
              std::vector<world::ProcSpec> procs = {
                  {"p0", "n1", fs::Cred{1, 1}, fs::Mode::Pessimistic}}) {
    auto parsed = cluster::ClusterConfig::parse_text(text);
    REQUIRE(parsed.ok());
    cfg = *parsed;
    w = std::make_unique<world::World>(cfg, 42);
    w->build(procs);
  }

  // Runs `body` as a coroutine and pumps the loop until it finishes.
  template <class F>
  void run(F body) {
    bool done = false;
    auto task = [](F b, bool* flag) -> sim::Task {
      co_await b();
      *flag = true;
    };
    task(std::move(body), &done);
    w->loop.run_while([&] { return !done; }, 3600ull * sim::kSec);
    REQUIRE(done);
  }

  void quiesce() { w->loop.run_until_quiesce(3600ull * sim::kSec); }
};

Bytes fill(size_t n, uint8_t v) { return Bytes(n, v); }

}  // namespace

TEST_CASE("create write fsync digest and read back locally") {
  Fx fx;
  LibFs* p0 = fx.w->libfs("p0");
  REQUIRE(p0 != nullptr);

  fx.run([&]() -> sim::Co<Result<Unit>> {
    auto fd = co_await p0->open("/shard0/a", fs::O_WR | fs::O_CREAT_, 0644);
    REQUIRE(fd.ok());
    auto n = co_await p0->write(*fd, fill(1024, 0x5A));
    REQUIRE(n.ok());
    CHECK(*n == 1024);

    // Read-your-writes straight from the private log.
    REQUIRE(p0->seek(*fd, 0).ok());
    auto r = co_await p0->read(*fd, 1024);
    REQUIRE(r.ok());
    CHECK(r->data == fill(1024, 0x5A));
    CHECK(r->provenance == fs::ReadTier::PrivateLog);

    // Pessimistic fsync: returns only after both replicas persisted.
    auto s = co_await p0->fsync(*fd);
    REQUIRE(s.ok());
    CHECK(p0->update_log().replicated_seq() >= 2);

    // Explicit eviction digests on every replica.
    auto ev = co_await p0->evict_private_cache();
    REQUIRE(ev.ok());
    CHECK(p0->update_log().digested_seq() == p0->update_log().tail_seq());
    co_return Unit{};
  });
  fx.quiesce();

  // Both replicas digested identical state for the chain's subtree.
  auto* k1 = fx.w->kernfs_on("n1");
  auto* k2 = fx.w->kernfs_on("n2");
  CHECK(k1->area().state_hash_subtree(1) == k2->area().state_hash_subtree(1));
  auto looked = k1->area().lookup(2, "a");
  REQUIRE(looked.ok());
  auto hits = k1->area().read(*looked, 0, 1024);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].data == fill(1024, 0x5A));
}

TEST_CASE("second process reads through lease transfer") {
  Fx fx(kTwoNodeConfig, {{"p0", "n1", fs::Cred{1, 1}, fs::Mode::Pessimistic},
                         {"p1", "n2", fs::Cred{1, 1}, fs::Mode::Pessimistic}});
  LibFs* p0 = fx.w->libfs("p0");
  LibFs* p1 = fx.w->libfs("p1");

  fx.run([&]() -> sim::Co<Result<Unit>> {
    auto fd = co_await p0->open("/shard0/f", fs::O_WR | fs::O_CREAT_, 0644);
    REQUIRE(fd.ok());
    REQUIRE((co_await p0->write(*fd, fill(512, 0x11))).ok());
    // No fsync: p1's acquire must still see all of p0's completed writes,
    // because revocation forces eviction before the lease transfers.
    auto fd1 = co_await p1->open("/shard0/f", fs::O_RD);
    REQUIRE(fd1.ok());
    auto r = co_await p1->read(*fd1, 512);
    REQUIRE(r.ok());
    CHECK(r->data == fill(512, 0x11));
    co_return Unit{};
  });
}

TEST_CASE("rename then readdir shows the new name only") {
  Fx fx;
  LibFs* p0 = fx.w->libfs("p0");
  fx.run([&]() -> sim::Co<Result<Unit>> {
    auto fd = co_await p0->open("/shard0/a", fs::O_WR | fs::O_CREAT_, 0644);
    REQUIRE(fd.ok());
    REQUIRE((co_await p0->write(*fd, fill(64, 1))).ok());
    REQUIRE((co_await p0->rename("/shard0/a", "/shard0/b")).ok());
    auto names = co_await p0->readdir("/shard0");
    REQUIRE(names.ok());
    REQUIRE(names->size() == 1);
    CHECK((*names)[0] == "b");
    auto st = co_await p0->stat("/shard0/b");
    REQUIRE(st.ok());
    CHECK(st->size == 64);
    auto miss = co_await p0->stat("/shard0/a");
    CHECK(miss.error() == Err::ENOENT_);
    co_return Unit{};
  });
}

TEST_CASE("posix error paths") {
  Fx fx;
  LibFs* p0 = fx.w->libfs("p0");
  fx.run([&]() -> sim::Co<Result<Unit>> {
    CHECK((co_await p0->open("/shard0/nope", fs::O_RD)).error() ==
          Err::ENOENT_);
    REQUIRE((co_await p0->mkdir("/shard0/d")).ok());
    CHECK((co_await p0->mkdir("/shard0/d")).error() == Err::EEXIST_);
    auto fd = co_await p0->open("/shard0/d", fs::O_WR);
    CHECK(fd.error() == Err::EISDIR_);
    REQUIRE((co_await p0->open("/shard0/d/x", fs::O_WR | fs::O_CREAT_)).ok());
    CHECK((co_await p0->unlink("/shard0/d")).error() == Err::ENOTEMPTY_);
    REQUIRE((co_await p0->unlink("/shard0/d/x")).ok());
    REQUIRE((co_await p0->unlink("/shard0/d")).ok());
    co_return Unit{};
  });
}

TEST_CASE("failover to the cache replica preserves acked writes") {
  Fx fx(kTwoNodeConfig, {{"p0", "n1", fs::Cred{1, 1}, fs::Mode::Pessimistic}});
  LibFs* p0 = fx.w->libfs("p0");

  fx.run([&]() -> sim::Co<Result<Unit>> {
    auto fd = co_await p0->open("/shard0/f", fs::O_WR | fs::O_CREAT_, 0644);
    REQUIRE(fd.ok());
    REQUIRE((co_await p0->write(*fd, fill(4096, 0xA1))).ok());
    REQUIRE((co_await p0->fsync(*fd)).ok());
    // Unsynced tail write that may be lost.
    REQUIRE((co_await p0->write(*fd, fill(4096, 0xB2))).ok());
    co_return Unit{};
  });

  // Kill the head node; keep only what already persisted.
  REQUIRE(fx.w->crash_node("n1", media::CutSpec::persisted_only()).ok());
  // Let the failure detector mark it and reconfigure.
  fx.w->loop.run_until(fx.w->loop.now() + 3 * sim::kSec);
  CHECK(fx.w->cluster().status("n1") == cluster::NodeStatus::Failed);

  // Restart the application on the surviving replica.
  LibFs* p0b = fx.w->restart_process("p0", "n2");
  bool done = false;
  [](LibFs* p, bool* flag) -> sim::Task {
    // Fail-over work: evict the mirrored log into the shared area.
    auto fd = co_await p->open("/shard0/f", fs::O_RD);
    REQUIRE(fd.ok());
    auto r = co_await p->read(*fd, 8192);
    REQUIRE(r.ok());
    // The acked fsync prefix is all there.
    REQUIRE(r->data.size() >= 4096);
    CHECK(Bytes(r->data.begin(), r->data.begin() + 4096) == fill(4096, 0xA1));
    *flag = true;
  }(p0b, &done);
  fx.w->loop.run_while([&] { return !done; }, 7200ull * sim::kSec);
  REQUIRE(done);
}
