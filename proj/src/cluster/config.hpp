/*
 * config.hpp
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
#include <string>
#include <vector>

#include "kernfs/shared_area.hpp"
#include "media/media.hpp"
#include "net/simnet.hpp"
#include "util/kvconfig.hpp"

namespace cfs::cluster {

// Chain attached to one namespace subtree: an ordered cache-replica list
// plus an optional reserve replica.
struct ChainConfig {
  uint32_t subtree_id = 0;  // 1-based; inode of the subtree root is id + 1
  std::string root;         // "/shard0"
  std::vector<std::string> replicas;  // node ids, head first
  std::string reserve;                // empty when none
};

struct NodeConfig {
  std::string id;
  uint32_t sockets = 1;
  // Simulated NVM budget for mirrored-log reservations (0 = unlimited).
  uint64_t resize_budget = 0;
};

// Parsed cluster configuration: nodes, chains, timeouts, latency model and
// cache/log sizing. Scenario files share the same key-value format.
struct ClusterConfig {
  std::vector<NodeConfig> nodes;
  std::vector<ChainConfig> chains;  // indexed by subtree_id - 1

  media::LatencyModel latency;
  net::NetConfig net;

  uint64_t log_capacity = 16ull << 20;
  uint64_t llog_capacity = 4ull << 20;  // lease log region per kernfs
  uint64_t read_cache_capacity = 4ull << 20;
  double digest_trigger = 0.70;  // digest when used/capacity crosses this
  bool coalesce_enabled = true;  // optimistic-mode extraction coalescing
  kernfs::SharedAreaConfig area;

  uint64_t lease_term_ns = 10ull * sim::kSec;
  uint64_t lease_grace_ns = 1ull * sim::kSec;
  uint64_t mgr_migration_ns = 5ull * sim::kSec;
  uint64_t heartbeat_interval_ns = 1ull * sim::kSec;
  uint64_t heartbeat_timeout_ns = 1ull * sim::kSec;
  uint64_t recovery_restart_delay_ns = 100ull * sim::kMsec;

  // Dynamic log sizing policy: multiplicative growth below the threshold,
  // fixed increments beyond it.
  uint64_t resize_multiplicative_threshold = 256ull << 20;
  uint64_t resize_increment = 256ull << 20;

  // Pin all lease management to one kernfs and disable migration
  // (disaggregated-metadata emulation for locality comparisons).
  std::string pinned_manager;

  const ChainConfig* chain_for_subtree(uint32_t id) const {
    return id >= 1 && id <= chains.size() ? &chains[id - 1] : nullptr;
  }
  // Deepest configured subtree whose root covers `path`; 0 when none.
  uint32_t subtree_of(const std::string& path) const;
  fs::InodeNum subtree_root_ino(uint32_t id) const { return id + 1; }
  bool node_in_chain(const std::string& node, const ChainConfig& c) const;

  static Result<ClusterConfig> parse(const KvFile& f);
  static Result<ClusterConfig> parse_text(const std::string& text);
};

}  // namespace cfs::cluster
