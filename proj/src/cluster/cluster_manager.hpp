/*
 * cluster_manager.hpp
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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cluster/config.hpp"
#include "proto/wire.hpp"
#include "sim/coro.hpp"
#include "world/world.hpp"

namespace cfs::cluster {

enum class NodeStatus { Alive, Failed, Recovering };

// Membership registry, heartbeat failure detector, epoch counter, chain
// configuration store and fail-over/rejoin orchestration. Modeled as a
// single reliable actor: its own replication is an environment assumption.
class ClusterManager {
 public:
  static constexpr const char* kEndpoint = "cluster";

  explicit ClusterManager(world::World& w);

  void start();

  uint64_t epoch() const { return epoch_; }
  NodeStatus status(const std::string& node) const;

  struct ChainState {
    const ChainConfig* cfg = nullptr;
    std::vector<std::string> active;  // cache-replica node ids, head first
    bool reserve_promoted = false;
    bool unavailable = false;
  };
  const ChainState& chain(uint32_t subtree_id) const {
    return chains_.at(subtree_id);
  }
  // Kernfs endpoints of the chain's active cache replicas (socket 0).
  std::vector<std::string> replica_kernfs(uint32_t subtree_id) const;
  std::string reserve_kernfs(uint32_t subtree_id) const;
  std::string manager_of(uint32_t subtree_id) const;

  // Direct detection path for process failures (local OS notices; the
  // heartbeat detector is not involved).
  void note_process_death(const std::string& proc);

  // Recovery flow after World restored the node's durable media and ran
  // kernfs local recovery. Completes when the node is Alive again.
  sim::Co<Result<Unit>> rejoin(media::NodeId node);

  // Failure detection entry point (also callable by tests).
  sim::Task fail_node(media::NodeId node);

  // Fired when fail-over reconfiguration for a failed node completed.
  std::function<void(const media::NodeId&)> failover_hook;

  sim::Time detection_time(const media::NodeId& node) const {
    auto it = detected_at_.find(node);
    return it == detected_at_.end() ? 0 : it->second;
  }

 private:
  sim::Co<Result<Bytes>> dispatch(std::string src, std::string tag, Bytes req);
  sim::Co<Result<Bytes>> who_manages(proto::WhoManagesReq req);
  sim::Co<Result<Unit>> migrate_management(uint32_t subtree_id,
                                           const std::string& from,
                                           const std::string& to);
  void heartbeat_tick();
  sim::Task probe(std::string node, std::string kernfs_ep);
  sim::Task run_failover(media::NodeId node);
  sim::Co<Result<Unit>> broadcast_epoch(bool failed, media::NodeId node);
  void cleanup_epoch_bitmaps();
  uint64_t stat_count(uint32_t subtree, const std::string& kernfs_ep) const;

  world::World& w_;
  uint64_t epoch_ = 1;
  std::map<std::string, NodeStatus> status_;
  std::map<std::string, sim::Time> failed_at_;
  std::map<std::string, sim::Time> detected_at_;
  std::map<std::string, uint64_t> crash_epoch_;
  std::map<uint32_t, ChainState> chains_;

  struct Assignment {
    std::string kernfs;
    sim::Time expiry = 0;
  };
  std::map<uint32_t, Assignment> assignments_;
  std::map<uint32_t, std::unique_ptr<sim::AsyncMutex>> assign_mutex_;
  // (subtree, kernfs) -> acquires since last migration decision.
  std::map<std::pair<uint32_t, std::string>, uint64_t> stats_;

  sim::AsyncMutex& assign_lock(uint32_t id);
};

}  // namespace cfs::cluster
