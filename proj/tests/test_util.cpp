/*
 * test_util.cpp
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

#include "sim/coro.hpp"
#include "sim/event_loop.hpp"
#include "sim/rng.hpp"
#include "util/bytes.hpp"
#include "util/crc32c.hpp"
#include "util/interval_set.hpp"
#include "util/kvconfig.hpp"

using namespace cfs;

TEST_CASE("crc32c known vector") {
  // Standard check value for CRC-32C over "123456789".
  const char* s = "123456789";
  CHECK(crc32c(reinterpret_cast<const uint8_t*>(s), 9) == 0xE3069283u);
  CHECK(crc32c(nullptr, 0) == 0u);
}

TEST_CASE("byte codec round trip") {
  Bytes buf;
  ByteWriter w(buf);
  w.u8(7);
  w.u32(0xDEADBEEF);
  w.u64(1ull << 40);
  w.str("hello");
  w.pad_to(8);
  CHECK(buf.size() % 8 == 0);

  ByteReader r(buf);
  CHECK(r.u8() == 7);
  CHECK(r.u32() == 0xDEADBEEF);
  CHECK(r.u64() == (1ull << 40));
  CHECK(r.str() == "hello");
  CHECK(r.ok());
}

TEST_CASE("interval set merge and query") {
  IntervalSet s;
  s.add(10, 20);
  s.add(30, 40);
  CHECK(s.contains(10, 20));
  CHECK(!s.contains(10, 21));
  CHECK(s.intersects(19, 31));
  CHECK(!s.intersects(20, 30));

  s.add(15, 35);  // bridges both
  CHECK(s.ranges().size() == 1);
  CHECK(s.contains(10, 40));

  auto gaps = s.uncovered(0, 50);
  REQUIRE(gaps.size() == 2);
  CHECK(gaps[0] == std::pair<uint64_t, uint64_t>{0, 10});
  CHECK(gaps[1] == std::pair<uint64_t, uint64_t>{40, 50});
}

TEST_CASE("interval set uncovered with partial overlap") {
  IntervalSet s;
  s.add(0, 4096);
  auto gaps = s.uncovered(1000, 5000);
  REQUIRE(gaps.size() == 1);
  CHECK(gaps[0] == std::pair<uint64_t, uint64_t>{4096, 5000});
}

TEST_CASE("kv config parsing") {
  std::string text = R"(
# cluster layout
version = 1
name = demo

[node n1]
sockets = 2
nvm = 64MB

[node n2]
sockets = 1

[chain /shard0]
replicas = n1, n2
reserve = n3

[timeouts]
lease_term = 10s
grace = 250ms
)";
  auto parsed = parse_kv_text(text);
  REQUIRE(parsed.ok());
  const KvFile& f = parsed.value();
  CHECK(f.root.get_u64("version", 0) == 1);
  CHECK(f.root.get("name") == "demo");
  CHECK(f.all("node").size() == 2);
  const KvSection* n1 = f.find("node", "n1");
  REQUIRE(n1 != nullptr);
  CHECK(n1->get_u64("sockets", 1) == 2);
  CHECK(n1->get_size("nvm", 0) == 64ull << 20);
  const KvSection* chain = f.find("chain", "/shard0");
  REQUIRE(chain != nullptr);
  auto reps = chain->get_list("replicas");
  REQUIRE(reps.size() == 2);
  CHECK(reps[0] == "n1");
  CHECK(reps[1] == "n2");
  const KvSection* to = f.first("timeouts");
  REQUIRE(to != nullptr);
  CHECK(to->get_time_ns("lease_term", 0) == 10ull * 1000 * 1000 * 1000);
  CHECK(to->get_time_ns("grace", 0) == 250ull * 1000 * 1000);
}

TEST_CASE("kv config rejects malformed lines") {
  CHECK(!parse_kv_text("key without equals").ok());
  CHECK(!parse_kv_text("[unclosed").ok());
}

TEST_CASE("event loop ordering and periodic accounting") {
  sim::EventLoop loop;
  std::vector<int> order;
  loop.schedule_at(100, [&] { order.push_back(2); });
  loop.schedule_at(50, [&] { order.push_back(1); });
  loop.schedule_at(100, [&] { order.push_back(3); });  // same time, later seq
  loop.run_until(1000);
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(loop.now() == 1000);
}

TEST_CASE("quiesce ignores periodic work") {
  sim::EventLoop loop;
  int ticks = 0;
  std::function<void()> tick = [&] {
    ticks++;
    if (ticks < 100) loop.schedule_in(10, tick, /*periodic=*/true);
  };
  loop.schedule_in(10, tick, /*periodic=*/true);
  bool worked = false;
  loop.schedule_at(25, [&] { worked = true; });
  loop.run_until_quiesce(10'000);
  CHECK(worked);
  CHECK(ticks <= 3);  // stopped as soon as real work drained
}

namespace {

sim::Task adder(sim::EventLoop& loop, sim::Future<int> in, int* out) {
  int v = co_await in;
  co_await sim::sleep_for(loop, 10);
  *out = v + 1;
}

sim::Co<int> doubler(sim::EventLoop& loop, int v) {
  co_await sim::sleep_for(loop, 5);
  co_return v * 2;
}

sim::Task chain(sim::EventLoop& loop, int* out) {
  int a = co_await doubler(loop, 21);
  int b = co_await doubler(loop, a);
  *out = b;
}

}  // namespace

TEST_CASE("coroutines resume through futures and sleeps") {
  sim::EventLoop loop;
  sim::Future<int> f;
  int out = 0;
  adder(loop, f, &out);
  loop.schedule_at(100, [&] { f.fulfill(41); });
  loop.run_until(1000);
  CHECK(out == 42);

  int chained = 0;
  chain(loop, &chained);
  loop.run_until(2000);
  CHECK(chained == 84);
}

TEST_CASE("rng is stable across runs") {
  sim::Rng a(123), b(123);
  for (int i = 0; i < 100; i++) CHECK(a.next() == b.next());
  sim::Rng c(1);
  uint64_t v = c.below(10);
  CHECK(v < 10);
}
