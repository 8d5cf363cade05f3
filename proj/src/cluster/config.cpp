/*
 * config.cpp
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

#include "cluster/config.hpp"

#include <algorithm>

namespace cfs::cluster {

uint32_t ClusterConfig::subtree_of(const std::string& path) const {
  uint32_t best = 0;
  size_t best_len = 0;
  for (const auto& c : chains) {
    if (fs::path_is_or_under(path, c.root) && c.root.size() >= best_len) {
      best = c.subtree_id;
      best_len = c.root.size();
    }
  }
  return best;
}

bool ClusterConfig::node_in_chain(const std::string& node,
                                  const ChainConfig& c) const {
  return std::find(c.replicas.begin(), c.replicas.end(), node) !=
         c.replicas.end();
}

Result<ClusterConfig> ClusterConfig::parse(const KvFile& f) {
  ClusterConfig cfg;
  cfg.latency = media::LatencyModel::from_config(f.first("latency"));
  cfg.net = net::NetConfig::from_config(f.first("net"));

  for (const KvSection* s : f.all("node")) {
    if (s->arg.empty()) return Err::ParseError;
    NodeConfig n;
    n.id = s->arg;
    n.sockets = static_cast<uint32_t>(s->get_u64("sockets", 1));
    n.resize_budget = s->get_size("resize_budget", 0);
    cfg.nodes.push_back(n);
  }
  if (cfg.nodes.empty()) return Err::ParseError;

  uint32_t next_id = 1;
  for (const KvSection* s : f.all("chain")) {
    ChainConfig c;
    c.subtree_id = next_id++;
    c.root = s->arg;
    if (!fs::path_valid(c.root) || c.root == "/") return Err::ParseError;
    c.replicas = s->get_list("replicas");
    if (c.replicas.empty()) return Err::ParseError;
    c.reserve = s->get("reserve");
    for (const auto& rep : c.replicas) {
      if (rep == c.reserve) return Err::ParseError;  // reserve is not a cache replica
    }
    cfg.chains.push_back(c);
  }
  // Configured roots must not nest (one chain per namespace region).
  for (const auto& a : cfg.chains) {
    for (const auto& b : cfg.chains) {
      if (a.subtree_id != b.subtree_id &&
          fs::path_is_or_under(a.root, b.root)) {
        return Err::ParseError;
      }
    }
  }

  if (const KvSection* d = f.first("defaults")) {
    cfg.log_capacity = d->get_size("log_capacity", cfg.log_capacity);
    cfg.llog_capacity = d->get_size("lease_log", cfg.llog_capacity);
    cfg.read_cache_capacity =
        d->get_size("read_cache", cfg.read_cache_capacity);
    cfg.digest_trigger = d->get_f64("digest_trigger", cfg.digest_trigger);
    cfg.coalesce_enabled = d->get_bool("coalesce", cfg.coalesce_enabled);
    cfg.area.journal_capacity =
        d->get_size("shared_journal", cfg.area.journal_capacity);
    cfg.area.ssd_capacity = d->get_size("shared_ssd", cfg.area.ssd_capacity);
    cfg.area.hot_capacity = d->get_size("hot_capacity", cfg.area.hot_capacity);
    cfg.area.reserve_capacity =
        d->get_size("reserve_capacity", cfg.area.reserve_capacity);
    cfg.area.high_water = d->get_f64("high_water", cfg.area.high_water);
    cfg.area.low_water = d->get_f64("low_water", cfg.area.low_water);
  }
  if (const KvSection* t = f.first("timeouts")) {
    cfg.lease_term_ns = t->get_time_ns("lease_term", cfg.lease_term_ns);
    cfg.lease_grace_ns = t->get_time_ns("lease_grace", cfg.lease_grace_ns);
    cfg.mgr_migration_ns =
        t->get_time_ns("manager_migration", cfg.mgr_migration_ns);
    cfg.heartbeat_interval_ns =
        t->get_time_ns("heartbeat_interval", cfg.heartbeat_interval_ns);
    cfg.heartbeat_timeout_ns =
        t->get_time_ns("heartbeat_timeout", cfg.heartbeat_timeout_ns);
    cfg.recovery_restart_delay_ns = t->get_time_ns(
        "recovery_restart_delay", cfg.recovery_restart_delay_ns);
  }
  if (const KvSection* z = f.first("resize")) {
    cfg.resize_multiplicative_threshold = z->get_size(
        "multiplicative_threshold", cfg.resize_multiplicative_threshold);
    cfg.resize_increment = z->get_size("increment", cfg.resize_increment);
  }
  if (const KvSection* m = f.first("management")) {
    cfg.pinned_manager = m->get("pinned_manager");
  }
  return cfg;
}

Result<ClusterConfig> ClusterConfig::parse_text(const std::string& text) {
  auto kv = parse_kv_text(text);
  if (!kv.ok()) return kv.error();
  return parse(*kv);
}

}  // namespace cfs::cluster
