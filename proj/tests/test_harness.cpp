/*
 * test_harness.cpp
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

#include "harness/engine.hpp"
#include "repl/mode_semantics.hpp"

using namespace cfs;
using namespace cfs::harness;

namespace {

const char* kCluster = R"(
[node n1]
[node n2]
[node n3]
[chain /shard0]
replicas = n1, n2
[chain /shard1]
replicas = n2, n3
[defaults]
log_capacity = 2MB
read_cache = 512KB
)";

cluster::ClusterConfig cfg_of(const char* text) {
  auto c = cluster::ClusterConfig::parse_text(text);
  REQUIRE(c.ok());
  return *c;
}

Scenario sc_of(const char* text) {
  auto s = Scenario::parse_text(text);
  REQUIRE(s.ok());
  return *s;
}

}  // namespace

TEST_CASE("mode semantics decision function") {
  using repl::guaranteed_prefix;
  // W1 fsync W2, node fails over: prefix = {W1}.
  CHECK(guaranteed_prefix(fs::Mode::Pessimistic, 1, false, 2) == 1);
  // Optimistic, no dsync, node fail-over: nothing guaranteed on the replica.
  CHECK(guaranteed_prefix(fs::Mode::Optimistic, 0, false, 2) == 0);
  // Process-only crash with the node surviving: all completed writes.
  CHECK(guaranteed_prefix(fs::Mode::Optimistic, 0, true, 2) == 2);
  // W1 dsync W2 dsync, crash after first ack only: prefix = {W1}.
  CHECK(guaranteed_prefix(fs::Mode::Optimistic, 1, false, 2) == 1);
}

TEST_CASE("seq_write scenario runs clean and converges") {
  auto sc = sc_of(R"(
seed = 7
mode = pessimistic
[workload]
kind = seq_write
processes = 2
file_size = 256KB
io_size = 4KB
fsync_every = 16
)");
  Engine eng(cfg_of(kCluster), sc);
  auto report = eng.check();
  INFO(report.text());
  CHECK(report.all_pass());
  CHECK(eng.world().metrics.get("libfs_digests") >= 0);
}

TEST_CASE("identical scenarios produce identical traces") {
  auto sc = sc_of(R"(
seed = 9
[workload]
kind = kv_mix
processes = 2
ops_per_proc = 30
)");
  Engine a(cfg_of(kCluster), sc);
  REQUIRE(a.run().ok());
  Engine b(cfg_of(kCluster), sc);
  REQUIRE(b.run().ok());
  CHECK(a.trace_hash() == b.trace_hash());
  CHECK(a.world().trace.count() == b.world().trace.count());
}

TEST_CASE("contend workload histories are linearizable") {
  auto sc = sc_of(R"(
seed = 21
[workload]
kind = contend
processes = 3
ops_per_proc = 3
)");
  Engine eng(cfg_of(kCluster), sc);
  auto report = eng.check();
  INFO(report.text());
  CHECK(report.all_pass());
  CHECK(eng.history().ops.size() == 9);
}

TEST_CASE("checker self-test rejects corrupted histories") {
  auto sc = sc_of(R"(
seed = 33
[workload]
kind = contend
processes = 2
ops_per_proc = 4
)");
  Engine eng(cfg_of(kCluster), sc);
  REQUIRE(eng.run().ok());
  auto lin = eng.check_linearizable();
  REQUIRE(lin.pass);

  // Corrupt a successful read result; some linearization must break.
  History mutated = eng.history();
  bool flipped = false;
  for (auto& op : mutated.ops) {
    if (op.op == HOp::Read && op.err == Err::Ok) {
      op.r_hash ^= 0xDEADBEEF;
      flipped = true;
      break;
    }
  }
  if (!flipped) {
    for (auto& op : mutated.ops) {
      if (op.op == HOp::Write && op.err == Err::Ok) {
        op.err = Err::ENOENT_;
        flipped = true;
        break;
      }
    }
  }
  REQUIRE(flipped);
  std::vector<std::string> roots{"/shard0", "/shard1"};
  std::map<std::string, fs::Cred> creds{{"p0", {1, 1}}, {"p1", {1, 1}}};
  std::vector<HistoryOp> ops;
  for (const auto& op : mutated.ops) {
    if (op.completed) ops.push_back(op);
  }
  LinChecker checker(roots);
  auto r = checker.check(ops, creds);
  CHECK(!r.linearizable);
  CHECK(!r.witness.empty());
}

TEST_CASE("crash scenario passes the prefix oracle") {
  auto sc = sc_of(R"(
seed = 5
mode = pessimistic
[workload]
kind = kv_mix
processes = 1
ops_per_proc = 25
read_frac = 0.2
procs = p0:n1
[fault]
at = 50ms
kind = crash_node
node = n1
cut = persisted_only
restart = p0:n2
)");
  Engine eng(cfg_of(kCluster), sc);
  auto report = eng.check();
  INFO(report.text());
  CHECK(report.all_pass());
}

TEST_CASE("process kill preserves all completed writes") {
  auto sc = sc_of(R"(
seed = 6
mode = optimistic
[workload]
kind = kv_mix
processes = 1
ops_per_proc = 20
read_frac = 0
sync_writes = false
procs = p0:n1
[fault]
at = 40ms
kind = kill_proc
proc = p0
)");
  Engine eng(cfg_of(kCluster), sc);
  auto report = eng.check();
  INFO(report.text());
  CHECK(report.all_pass());
}

TEST_CASE("maildir coalescing saves replicated bytes") {
  const char* scenario = R"(
seed = 11
mode = optimistic
[workload]
kind = maildir
processes = 2
deliveries = 10
msg_size = 8KB
pattern = private
)";
  auto with = sc_of(scenario);
  Engine a(cfg_of(kCluster), with);
  REQUIRE(a.run().ok());
  uint64_t coalesced = a.world().net.bytes_for_tag("SEGMENT_WRITE");

  const char* no_coalesce = R"(
[node n1]
[node n2]
[node n3]
[chain /shard0]
replicas = n1, n2
[chain /shard1]
replicas = n2, n3
[defaults]
log_capacity = 2MB
read_cache = 512KB
coalesce = off
)";
  Engine b(cfg_of(no_coalesce), with);
  REQUIRE(b.run().ok());
  uint64_t raw = b.world().net.bytes_for_tag("SEGMENT_WRITE");
  INFO("coalesced=", coalesced, " raw=", raw);
  CHECK(coalesced < raw);
  // The journal write disappears entirely from the stream.
  CHECK(coalesced * 2 <= raw + raw / 4);
}

TEST_CASE("locality patterns order remote lease hops") {
  // Mail-delivery shapes: private and sharded maildirs keep lease
  // management local; round-robin delivery bounces it across nodes; a
  // pinned single manager (disaggregated metadata emulation) pays a remote
  // hop for every atomic operation.
  auto run_pattern = [&](const std::string& pattern, const char* extra_cfg) {
    std::string text = std::string(R"(
seed = 13
mode = optimistic
[workload]
kind = maildir
processes = 3
deliveries = 20
warmup_deliveries = 4
msg_size = 4KB
queue_journal = off
pattern = )") + pattern + "\nprocs = p0:n1,p1:n2,p2:n3\n";
    std::string cl = std::string(R"(
[node n1]
[node n2]
[node n3]
[node n4]
[chain /shard0]
replicas = n1, n2
[chain /shard1]
replicas = n2, n3
[chain /shard2]
replicas = n3, n1
[defaults]
log_capacity = 2MB
read_cache = 512KB
)") + extra_cfg;
    Engine eng(cfg_of(cl.c_str()), sc_of(text.c_str()));
    REQUIRE(eng.run().ok());
    return eng.world().metrics.get("lease_remote_hops");
  };
  uint64_t private_hops = run_pattern("private", "");
  uint64_t sharded = run_pattern("sharded", "");
  uint64_t rr = run_pattern("round_robin", "");
  // Orion emulation: same delivery pattern, management pinned to a
  // dedicated node, so every atomic op pays at least one remote hop.
  uint64_t single = run_pattern("round_robin",
                                "[management]\npinned_manager = n4/k0\n");
  INFO("private=", private_hops, " sharded=", sharded, " rr=", rr,
       " single=", single);
  CHECK(private_hops == 0);
  CHECK(private_hops < sharded);
  CHECK(sharded < rr);
  CHECK(rr < single);
}
