/*
 * simnet.cpp
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

#include "net/simnet.hpp"

#include <algorithm>

namespace cfs::net {

NetConfig NetConfig::from_config(const KvSection* sec) {
  NetConfig c;
  if (!sec) return c;
  c.rdma_deliver_ns = sec->get_time_ns("rdma_deliver", c.rdma_deliver_ns);
  c.rpc_oneway_ns = sec->get_time_ns("rpc_oneway", c.rpc_oneway_ns);
  c.local_oneway_ns = sec->get_time_ns("local_oneway", c.local_oneway_ns);
  c.rpc_timeout_ns = sec->get_time_ns("rpc_timeout", c.rpc_timeout_ns);
  return c;
}

void SimNet::add_endpoint(const EndpointId& ep, const NodeId& node) {
  endpoints_[ep] = Endpoint{node, nullptr};
  if (!alive_.count(node)) {
    alive_[node] = true;
    incarnation_[node] = 0;
  }
}

void SimNet::set_rpc_handler(const EndpointId& ep, RpcHandler handler) {
  auto it = endpoints_.find(ep);
  CFS_ASSERT_MSG(it != endpoints_.end(), "unknown endpoint %s", ep.c_str());
  it->second.handler = std::move(handler);
}

void SimNet::register_region(const EndpointId& owner, RegionId region,
                             const EndpointId& writer) {
  auto& entry = regions_[region];
  if (entry.first.empty()) entry.first = owner;
  CFS_ASSERT(entry.first == owner);
  entry.second.insert(writer);
}

void SimNet::unregister_region(RegionId region) { regions_.erase(region); }

void SimNet::set_node_alive(const NodeId& node, bool alive) {
  alive_[node] = alive;
  if (!alive) incarnation_[node]++;
}

bool SimNet::node_alive(const NodeId& node) const {
  auto it = alive_.find(node);
  return it != alive_.end() && it->second;
}

bool SimNet::endpoint_alive(const EndpointId& ep) const {
  auto it = endpoints_.find(ep);
  if (it == endpoints_.end()) return false;
  return node_alive(it->second.node);
}

Time SimNet::oneway_for(const EndpointId& src, const EndpointId& dst) const {
  auto s = endpoints_.find(src);
  auto d = endpoints_.find(dst);
  if (s != endpoints_.end() && d != endpoints_.end() &&
      s->second.node == d->second.node) {
    return cfg_.local_oneway_ns;
  }
  return cfg_.rpc_oneway_ns;
}

Time SimNet::conn_deliver_at(const EndpointId& src, const EndpointId& dst,
                             Time oneway) {
  Time& last = conn_last_delivery_[{src, dst}];
  Time at = std::max(last, loop_.now() + oneway);
  // Strictly later than the previous delivery keeps per-connection FIFO
  // unambiguous even for zero-latency test configurations.
  if (at <= last) at = last + 1;
  last = at;
  return at;
}

void SimNet::count(const std::string& tag, uint64_t bytes) {
  tag_counts_[tag]++;
  tag_bytes_[tag] += bytes;
}

uint64_t SimNet::rpc_count(const std::string& tag) const {
  auto it = tag_counts_.find(tag);
  return it == tag_counts_.end() ? 0 : it->second;
}

uint64_t SimNet::bytes_for_tag(const std::string& tag) const {
  auto it = tag_bytes_.find(tag);
  return it == tag_bytes_.end() ? 0 : it->second;
}

sim::Future<Result<media::WriteTicket>> SimNet::rdma_write(
    const EndpointId& src, const EndpointId& dst, RegionId region,
    uint64_t offset, Bytes data, const std::string& tag) {
  sim::Future<Result<media::WriteTicket>> done;
  auto dit = endpoints_.find(dst);
  if (dit == endpoints_.end()) {
    done.fulfill(Err::DstFailed);
    return done;
  }
  auto rit = regions_.find(region);
  if (rit == regions_.end() || rit->second.first != dst ||
      !rit->second.second.count(src)) {
    done.fulfill(Err::UnregisteredRegion);
    return done;
  }

  const NodeId dst_node = dit->second.node;
  Time deliver = conn_deliver_at(src, dst, cfg_.rdma_deliver_ns);
  uint64_t size = data.size();
  loop_.schedule_at(deliver, [this, src, dst, dst_node, region, offset,
                              data = std::move(data), tag, size, done] {
    if (!node_alive(dst_node)) {
      done.try_fulfill(Err::DstFailed);
      return;
    }
    auto ticket = media_.write_persistent(region, offset, data,
                                          media::Locality::Local);
    delivered_++;
    trace_.record(loop_.now(), "RDMA_WRITE", src, dst, size, tag);
    count(tag, size);
    if (!ticket.ok()) {
      done.try_fulfill(ticket.error());
      return;
    }
    // Completion implies destination durability: acknowledge only after the
    // destination-side persist deadline, and only if the node stayed up.
    uint64_t inc = incarnation_.at(dst_node);
    media::WriteTicket tk = ticket.value();
    loop_.schedule_at(std::max(loop_.now(), tk.persist_at),
                      [this, dst_node, inc, tk, done] {
                        if (!node_alive(dst_node) ||
                            incarnation_.at(dst_node) != inc) {
                          done.try_fulfill(Err::DstFailed);
                        } else {
                          done.try_fulfill(tk);
                        }
                      });
  });
  return done;
}

sim::Future<Result<Bytes>> SimNet::rpc(const EndpointId& src,
                                       const EndpointId& dst,
                                       const std::string& tag, Bytes req,
                                       Time timeout_ns) {
  sim::Future<Result<Bytes>> done;
  auto dit = endpoints_.find(dst);
  if (dit == endpoints_.end()) {
    done.fulfill(Err::DstFailed);
    return done;
  }
  const NodeId dst_node = dit->second.node;

  // The timeout fires unless a reply (or explicit failure) won the race.
  if (timeout_ns == 0) timeout_ns = cfg_.rpc_timeout_ns;
  loop_.schedule_in(timeout_ns, [this, dst_node, done] {
    done.try_fulfill(node_alive(dst_node) ? Err::Timeout : Err::DstFailed);
  });

  Time deliver = conn_deliver_at(src, dst, oneway_for(src, dst));
  uint64_t size = req.size();
  loop_.schedule_at(deliver, [this, src, dst, dst_node, tag,
                              req = std::move(req), size, done] {
    if (!node_alive(dst_node)) {
      // Request lost; the armed timeout reports dst failure.
      return;
    }
    delivered_++;
    trace_.record(loop_.now(), "RPC_REQUEST", src, dst, size, tag);
    count(tag, size);
    auto& ep = endpoints_.at(dst);
    if (!ep.handler) {
      done.try_fulfill(Err::DstFailed);
      return;
    }
    uint64_t inc = incarnation_.at(dst_node);
    auto reply_fut = ep.handler(src, tag, req);
    reply_fut.on_ready([this, src, dst, dst_node, inc, tag,
                        done](const Result<Bytes>& reply) {
      // A reply computed before a crash is lost with the node.
      if (!node_alive(dst_node) || incarnation_.at(dst_node) != inc) return;
      Time at = conn_deliver_at(dst, src, oneway_for(dst, src));
      uint64_t rsize = reply.ok() ? reply.value().size() : 0;
      loop_.schedule_at(at, [this, src, dst, tag, rsize, reply, done] {
        if (!endpoint_alive(src)) return;  // requester died meanwhile
        delivered_++;
        trace_.record(loop_.now(), "RPC_REPLY", dst, src, rsize, tag);
        done.try_fulfill(reply);
      });
    });
  });
  return done;
}

sim::Future<Result<SimNet::ReadInto>> SimNet::read_into_requester_cache(
    const EndpointId& src, const EndpointId& dst, const std::string& tag,
    Bytes req, RegionId src_cache_region, uint64_t cache_off,
    uint64_t first_len,
    sim::Future<Result<media::WriteTicket>>* trailer_done) {
  sim::Future<Result<ReadInto>> done;
  sim::Future<Result<media::WriteTicket>> trailer;
  if (trailer_done) *trailer_done = trailer;
  // The requester must have pre-registered its read cache for the responder.
  auto rit = regions_.find(src_cache_region);
  if (rit == regions_.end() || rit->second.first != src ||
      !rit->second.second.count(dst)) {
    done.fulfill(Err::UnregisteredRegion);
    return done;
  }
  auto dit = endpoints_.find(dst);
  if (dit == endpoints_.end()) {
    done.fulfill(Err::DstFailed);
    return done;
  }
  const NodeId dst_node = dit->second.node;

  loop_.schedule_in(cfg_.rpc_timeout_ns, [this, dst_node, done, trailer] {
    done.try_fulfill(node_alive(dst_node) ? Err::Timeout : Err::DstFailed);
    trailer.try_fulfill(Err::Timeout);
  });

  Time deliver = conn_deliver_at(src, dst, oneway_for(src, dst));
  uint64_t size = req.size();
  loop_.schedule_at(deliver, [this, src, dst, dst_node, tag,
                              req = std::move(req), size, cache_off,
                              src_cache_region, first_len, done, trailer] {
    if (!node_alive(dst_node)) return;
    delivered_++;
    trace_.record(loop_.now(), "RPC_REQUEST", src, dst, size, tag);
    count(tag, size);
    auto& ep = endpoints_.at(dst);
    if (!ep.handler) {
      done.try_fulfill(Err::DstFailed);
      return;
    }
    uint64_t inc = incarnation_.at(dst_node);
    auto payload_fut = ep.handler(src, tag, req);
    payload_fut.on_ready([this, src, dst, dst_node, inc, tag, cache_off,
                          src_cache_region, first_len, done,
                          trailer](const Result<Bytes>& r) {
      if (!node_alive(dst_node) || incarnation_.at(dst_node) != inc) return;
      if (!r.ok()) {
        // Negative reply: a short completion message, no cache write.
        Time at = conn_deliver_at(dst, src, oneway_for(dst, src));
        loop_.schedule_at(at, [this, src, dst, tag, err = r.error(), done] {
          if (!endpoint_alive(src)) return;
          delivered_++;
          trace_.record(loop_.now(), "RPC_REPLY", dst, src, 0, tag);
          done.try_fulfill(err);
        });
        return;
      }
      const Bytes& payload = r.value();
      uint64_t total = payload.size();
      uint64_t first = std::min<uint64_t>(first_len, total);
      if (first > 0) {
        Bytes head(payload.begin(), payload.begin() + first);
        rdma_write(dst, src, src_cache_region, cache_off, std::move(head),
                   "READ_FILL");
      }
      // Small completion message follows the requested bytes on the same
      // connection; the block remainder trails it as prefetch.
      Time at = conn_deliver_at(dst, src, oneway_for(dst, src));
      loop_.schedule_at(at, [this, src, dst, tag, first, total, done] {
        if (!endpoint_alive(src)) return;
        delivered_++;
        trace_.record(loop_.now(), "RPC_REPLY", dst, src, 16, tag);
        done.try_fulfill(ReadInto{first, total - first});
      });
      if (first < total) {
        Bytes rest(payload.begin() + first, payload.end());
        auto wr = rdma_write(dst, src, src_cache_region, cache_off + first,
                             std::move(rest), "READ_PREFETCH");
        wr.on_ready([trailer](const Result<media::WriteTicket>& t) {
          trailer.try_fulfill(t);
        });
      } else {
        trailer.try_fulfill(media::WriteTicket{0, 0});
      }
    });
  });
  return done;
}

}  // namespace cfs::net
