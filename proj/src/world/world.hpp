/*
 * world.hpp
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

#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cluster/config.hpp"
#include "log/entry.hpp"
#include "media/media.hpp"
#include "net/simnet.hpp"
#include "sim/coro.hpp"
#include "sim/event_loop.hpp"
#include "sim/rng.hpp"
#include "sim/trace.hpp"

namespace cfs::kernfs {
class KernFs;
}
namespace cfs::fs {
class LibFs;
}
namespace cfs::cluster {
class ClusterManager;
}

namespace cfs::world {

using media::NodeId;

struct Metrics {
  std::map<std::string, uint64_t> counters;

  void add(const std::string& name, uint64_t v = 1) { counters[name] += v; }
  void set(const std::string& name, uint64_t v) { counters[name] = v; }
  uint64_t get(const std::string& name) const {
    auto it = counters.find(name);
    return it == counters.end() ? 0 : it->second;
  }
  void reset(const std::string& name) { counters.erase(name); }

  std::string tsv() const {
    std::ostringstream out;
    out << "metric\tvalue\n";
    for (const auto& [k, v] : counters) out << k << '\t' << v << '\n';
    return out.str();
  }
};

struct ProcSpec {
  std::string name;  // logical, stable across restarts ("p0")
  NodeId node;       // home node
  fs::Cred cred;
  fs::Mode mode = fs::Mode::Pessimistic;
};

// One simulated deployment: storage, network, kernfs daemons, libfs
// processes and the cluster manager, all driven by a single event loop.
class World {
 public:
  World(cluster::ClusterConfig cfg, uint64_t seed);
  ~World();

  void build(const std::vector<ProcSpec>& procs);

  sim::EventLoop loop;
  sim::Rng rng;
  sim::TraceRecorder trace;
  Metrics metrics;
  cluster::ClusterConfig cfg;
  media::MediaStore media;
  net::SimNet net;

  struct NodeRt {
    bool alive = true;
    uint64_t incarnation = 0;
    std::vector<std::unique_ptr<kernfs::KernFs>> kernfs;
  };

  kernfs::KernFs* kernfs_on(const NodeId& node, uint32_t socket = 0);
  kernfs::KernFs* kernfs_by_id(const std::string& id);
  fs::LibFs* libfs(const std::string& proc);
  cluster::ClusterManager& cluster() { return *cluster_; }
  bool node_alive(const NodeId& node) const;
  uint64_t node_incarnation(const NodeId& node) const;
  const std::map<NodeId, NodeRt>& nodes() const { return nodes_; }
  const std::map<std::string, ProcSpec>& proc_specs() const {
    return proc_specs_;
  }
  std::vector<std::string> proc_names() const;
  std::vector<std::string> all_kernfs_ids() const;
  // Update logs whose region lives on `node` (dead or alive instances).
  std::vector<std::pair<std::string, media::RegionId>> logs_on_node(
      const NodeId& node) const;
  // All current and former libfs instances of a logical process.
  std::vector<fs::LibFs*> instances_of(const std::string& proc);
  // Lookup by owner string "<proc>.<incarnation>".
  fs::LibFs* instance_by_owner(const std::string& owner);

  // --- fault injection -----------------------------------------------------

  Result<media::CrashReport> crash_node(const NodeId& node,
                                        const media::CutSpec& cut);
  // Restores durable state and runs local recovery plus the rejoin
  // protocol; completion is observable via cluster membership.
  void recover_node(const NodeId& node);
  void kill_process(const std::string& proc);
  // Starts a fresh instance of a logical process (optionally on a new node).
  fs::LibFs* restart_process(const std::string& proc, const NodeId& node);

  // --- hooks for the harness -------------------------------------------------

  // Called on every append to any update log (prefix-oracle ledger).
  std::function<void(const std::string& proc, uint64_t incarnation,
                     const log::LogEntry&)> append_hook;
  // Called when a chain ack completes an fsync/dsync (acked ledger).
  std::function<void(const std::string& proc, uint64_t incarnation,
                     uint64_t through_seq)> ack_hook;
  // Called after every lease grant/transfer/expiry at any manager.
  std::function<void(const std::string& manager)> lease_event_hook;
  // Called when the cluster manager marks a node failed.
  std::function<void(const NodeId& node, uint64_t epoch)> failure_hook;
  // Called when a rejoin completes, with the invalidated inode set.
  std::function<void(const NodeId& node, const std::vector<fs::InodeNum>&)>
      rejoin_hook;

  // Stable small index per logical process (inode namespace partitioning).
  uint64_t proc_index(const std::string& proc) const {
    uint64_t i = 1;
    for (const auto& [name, spec] : proc_specs_) {
      if (name == proc) return i;
      i++;
    }
    return i;
  }

  uint64_t next_proc_incarnation(const std::string& proc) {
    return ++proc_incarnations_[proc];
  }
  uint64_t proc_incarnation(const std::string& proc) const {
    auto it = proc_incarnations_.find(proc);
    return it == proc_incarnations_.end() ? 0 : it->second;
  }

 private:
  std::map<NodeId, NodeRt> nodes_;
  std::map<std::string, std::unique_ptr<fs::LibFs>> procs_;
  std::vector<std::unique_ptr<fs::LibFs>> graveyard_;  // dead instances
  std::map<std::string, ProcSpec> proc_specs_;
  std::map<std::string, uint64_t> proc_incarnations_;
  std::unique_ptr<cluster::ClusterManager> cluster_;
};

}  // namespace cfs::world
