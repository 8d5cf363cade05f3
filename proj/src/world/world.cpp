/*
 * world.cpp
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

#include "world/world.hpp"

#include "cluster/cluster_manager.hpp"
#include "fs/libfs.hpp"
#include "kernfs/kernfs.hpp"

namespace cfs::world {

World::World(cluster::ClusterConfig config, uint64_t seed)
    : loop(),
      rng(seed),
      trace(),
      metrics(),
      cfg(std::move(config)),
      media(loop, cfg.latency),
      net(loop, media, trace, cfg.net) {}

World::~World() = default;

void World::build(const std::vector<ProcSpec>& procs) {
  cluster_ = std::make_unique<cluster::ClusterManager>(*this);

  for (const auto& n : cfg.nodes) {
    NodeRt& rt = nodes_[n.id];
    for (uint32_t s = 0; s < n.sockets; s++) {
      rt.kernfs.push_back(std::make_unique<kernfs::KernFs>(*this, n.id, s));
    }
  }

  // Subtree roots and chain roles on every participating kernfs.
  for (const auto& chain : cfg.chains) {
    for (const auto& node : chain.replicas) {
      for (auto& k : nodes_.at(node).kernfs) {
        k->area().set_subtree_role(chain.subtree_id,
                                   kernfs::Role::CacheReplica);
        k->area().bootstrap_dir(fs::kRootInode,
                                cfg.subtree_root_ino(chain.subtree_id),
                                fs::base_name(chain.root), chain.subtree_id);
      }
    }
    if (!chain.reserve.empty()) {
      for (auto& k : nodes_.at(chain.reserve).kernfs) {
        k->area().set_subtree_role(chain.subtree_id,
                                   kernfs::Role::ReserveReplica);
        k->area().bootstrap_dir(fs::kRootInode,
                                cfg.subtree_root_ino(chain.subtree_id),
                                fs::base_name(chain.root), chain.subtree_id);
      }
    }
  }

  // Full mesh of lease-log mirrors: any kernfs may manage a subtree whose
  // chain peers must hold a replica of its lease log.
  std::vector<kernfs::KernFs*> all;
  for (auto& [id, rt] : nodes_) {
    for (auto& k : rt.kernfs) all.push_back(k.get());
  }
  for (auto* host : all) {
    for (auto* peer : all) {
      if (host != peer) host->mirror_of_peer_llog(peer->id());
    }
  }

  cluster_->start();

  for (const auto& spec : procs) {
    proc_specs_[spec.name] = spec;
    uint64_t inc = next_proc_incarnation(spec.name);
    auto lf = std::make_unique<fs::LibFs>(*this, spec.name, spec.node,
                                          spec.cred, spec.mode, inc);
    kernfs_on(spec.node)->register_local_libfs(lf.get());
    procs_[spec.name] = std::move(lf);
  }
}

kernfs::KernFs* World::kernfs_on(const NodeId& node, uint32_t socket) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) return nullptr;
  if (socket >= it->second.kernfs.size()) return nullptr;
  return it->second.kernfs[socket].get();
}

kernfs::KernFs* World::kernfs_by_id(const std::string& id) {
  for (auto& [node, rt] : nodes_) {
    for (auto& k : rt.kernfs) {
      if (k->id() == id) return k.get();
    }
  }
  return nullptr;
}

fs::LibFs* World::libfs(const std::string& proc) {
  auto it = procs_.find(proc);
  return it == procs_.end() ? nullptr : it->second.get();
}

bool World::node_alive(const NodeId& node) const {
  auto it = nodes_.find(node);
  return it != nodes_.end() && it->second.alive;
}

uint64_t World::node_incarnation(const NodeId& node) const {
  auto it = nodes_.find(node);
  return it == nodes_.end() ? 0 : it->second.incarnation;
}

std::vector<std::string> World::proc_names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : proc_specs_) out.push_back(name);
  return out;
}

std::vector<std::string> World::all_kernfs_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, rt] : nodes_) {
    for (const auto& k : rt.kernfs) out.push_back(k->id());
  }
  return out;
}

std::vector<std::pair<std::string, media::RegionId>> World::logs_on_node(
    const NodeId& node) const {
  std::vector<std::pair<std::string, media::RegionId>> out;
  for (const auto& [name, lf] : procs_) {
    if (lf && lf->node() == node) out.emplace_back(name, lf->log_region());
  }
  for (const auto& lf : graveyard_) {
    if (lf->node() == node) out.emplace_back(lf->name(), lf->log_region());
  }
  return out;
}

std::vector<fs::LibFs*> World::instances_of(const std::string& proc) {
  std::vector<fs::LibFs*> out;
  auto it = procs_.find(proc);
  if (it != procs_.end() && it->second) out.push_back(it->second.get());
  for (auto& lf : graveyard_) {
    if (lf->name() == proc) out.push_back(lf.get());
  }
  return out;
}

fs::LibFs* World::instance_by_owner(const std::string& owner) {
  for (fs::LibFs* lf : instances_of(owner.substr(0, owner.rfind('.')))) {
    if (lf->owner_string() == owner) return lf;
  }
  return nullptr;
}

Result<media::CrashReport> World::crash_node(const NodeId& node,
                                             const media::CutSpec& cut) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) return Err::UnknownRegion;
  NodeRt& rt = it->second;
  rt.alive = false;
  rt.incarnation++;
  for (auto& [name, lf] : procs_) {
    if (lf && lf->node() == node) lf->mark_dead();
  }
  for (auto& k : rt.kernfs) k->on_node_crash();
  net.set_node_alive(node, false);
  metrics.add("crashes");
  return media.crash(node, cut);
}

void World::recover_node(const NodeId& node) {
  auto it = nodes_.find(node);
  CFS_ASSERT(it != nodes_.end());
  // OS restart model: a fixed boot delay before local recovery begins.
  loop.schedule_in(cfg.recovery_restart_delay_ns, [this, node] {
    auto rec = media.recover(node);
    CFS_ASSERT(rec.ok());
    nodes_.at(node).alive = true;
    net.set_node_alive(node, true);
    [](World* w, NodeId n) -> sim::Task {
      // If the cluster failed this node over, its chains adopted the
      // survivors' prefix; dead local logs must not be re-digested.
      bool failed_over =
          w->cluster_->status(n) == cluster::NodeStatus::Failed;
      for (auto& k : w->nodes_.at(n).kernfs) {
        auto done = k->local_recover(!failed_over);
        co_await done;
      }
      co_await w->cluster_->rejoin(n);
    }(this, node);
  });
}

void World::kill_process(const std::string& proc) {
  auto it = procs_.find(proc);
  CFS_ASSERT(it != procs_.end() && it->second);
  fs::LibFs* lf = it->second.get();
  if (lf->dead()) return;
  lf->mark_dead();
  metrics.add("process_kills");
  // Immediately detected by the local OS; the colocated kernfs recovers the
  // dead update log and releases the leases, no heartbeat involved.
  cluster_->note_process_death(proc);
}

fs::LibFs* World::restart_process(const std::string& proc,
                                  const NodeId& node) {
  auto it = procs_.find(proc);
  CFS_ASSERT(it != procs_.end());
  fs::Mode mode = fs::Mode::Pessimistic;
  if (it->second) {
    mode = it->second->mode();
    if (auto* k = kernfs_on(it->second->node())) {
      k->unregister_local_libfs(it->second.get());
    }
    graveyard_.push_back(std::move(it->second));
  }
  uint64_t inc = next_proc_incarnation(proc);
  auto lf = std::make_unique<fs::LibFs>(*this, proc,
                                        node, proc_specs_.at(proc).cred, mode,
                                        inc);
  kernfs_on(node)->register_local_libfs(lf.get());
  fs::LibFs* raw = lf.get();
  procs_[proc] = std::move(lf);
  metrics.add("process_restarts");
  return raw;
}

}  // namespace cfs::world
