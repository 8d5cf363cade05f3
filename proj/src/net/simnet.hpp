/*
 * simnet.hpp
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
#include <set>
#include <string>

#include "media/media.hpp"
#include "sim/coro.hpp"
#include "sim/event_loop.hpp"
#include "sim/trace.hpp"
#include "util/bytes.hpp"
#include "util/result.hpp"

namespace cfs::net {

using media::NodeId;
using media::RegionId;
using sim::Time;

// Endpoints are named actors: "n1/k0" (kernfs), "n1/p2" (libfs process),
// "cluster" (cluster manager).
using EndpointId = std::string;

struct NetConfig {
  // One-way propagation before the dst-side NVM write is issued. Together
  // with the local persist latency this lands near the remote-NVM write
  // figure of the latency table.
  Time rdma_deliver_ns = 7900;
  Time rpc_oneway_ns = 1400;
  // Same-node libfs <-> kernfs link (the system call analog).
  Time local_oneway_ns = 300;
  Time rpc_timeout_ns = 500 * sim::kMsec;

  static NetConfig from_config(const KvSection* sec);
};

struct RpcReply {
  Result<Bytes> body;
  RpcReply(Result<Bytes> b) : body(std::move(b)) {}  // NOLINT(implicit)
};

// Handlers run as coroutines on the destination actor and produce the reply.
using RpcHandler =
    std::function<sim::Future<Result<Bytes>>(const EndpointId& src, const std::string& tag, const Bytes& req)>;

// Deterministic in-process network: per-connection FIFO delivery, no
// duplication, loss only through endpoint fail-stop. One-sided writes land
// in pre-registered media regions without involving the destination actor;
// their completion implies destination-side durability.
class SimNet {
 public:
  SimNet(sim::EventLoop& loop, media::MediaStore& media,
         sim::TraceRecorder& trace, NetConfig cfg)
      : loop_(loop), media_(media), trace_(trace), cfg_(cfg) {}

  void add_endpoint(const EndpointId& ep, const NodeId& node);
  void set_rpc_handler(const EndpointId& ep, RpcHandler handler);

  // Grants `writer` one-sided write access to `region` owned by `owner`.
  void register_region(const EndpointId& owner, RegionId region,
                       const EndpointId& writer);
  void unregister_region(RegionId region);

  // One-sided ordered write. The returned future completes once the bytes
  // are durable at the destination (or with an error).
  sim::Future<Result<media::WriteTicket>> rdma_write(const EndpointId& src,
                                                     const EndpointId& dst,
                                                     RegionId region,
                                                     uint64_t offset,
                                                     Bytes data,
                                                     const std::string& tag);

  sim::Future<Result<Bytes>> rpc(const EndpointId& src, const EndpointId& dst,
                                 const std::string& tag, Bytes req,
                                 Time timeout_ns = 0);  // 0: config default

  // RPC whose reply payload is RDMA-written straight into the requester's
  // registered cache region instead of riding the reply message. For
  // requests smaller than a cache block the requested bytes land first and
  // the remainder of the block follows as prefetch, after the reply.
  struct ReadInto {
    uint64_t bytes = 0;           // requested bytes written at cache_off
    uint64_t prefetch_bytes = 0;  // trailing prefetch written after them
  };
  sim::Future<Result<ReadInto>> read_into_requester_cache(
      const EndpointId& src, const EndpointId& dst, const std::string& tag,
      Bytes req, RegionId src_cache_region, uint64_t cache_off,
      uint64_t first_len,
      sim::Future<Result<media::WriteTicket>>* trailer_done = nullptr);

  // Fail-stop injection. Messages already in flight still arrive; new
  // activity from or to a dead node's endpoints errors out.
  void set_node_alive(const NodeId& node, bool alive);
  bool node_alive(const NodeId& node) const;
  bool endpoint_alive(const EndpointId& ep) const;

  uint64_t messages_delivered() const { return delivered_; }
  uint64_t rpc_count(const std::string& tag) const;
  uint64_t bytes_for_tag(const std::string& tag) const;

 private:
  struct Endpoint {
    NodeId node;
    RpcHandler handler;
  };

  Time conn_deliver_at(const EndpointId& src, const EndpointId& dst,
                       Time oneway);
  Time oneway_for(const EndpointId& src, const EndpointId& dst) const;
  void count(const std::string& tag, uint64_t bytes);

  sim::EventLoop& loop_;
  media::MediaStore& media_;
  sim::TraceRecorder& trace_;
  NetConfig cfg_;

  std::map<EndpointId, Endpoint> endpoints_;
  std::map<NodeId, bool> alive_;
  std::map<NodeId, uint64_t> incarnation_;
  // (owner endpoint, region) -> allowed writers
  std::map<RegionId, std::pair<EndpointId, std::set<EndpointId>>> regions_;
  std::map<std::pair<EndpointId, EndpointId>, Time> conn_last_delivery_;
  uint64_t delivered_ = 0;
  std::map<std::string, uint64_t> tag_counts_;
  std::map<std::string, uint64_t> tag_bytes_;
};

}  // namespace cfs::net
