/*
 * history.hpp
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

#include <string>
#include <vector>

#include "fs/types.hpp"
#include "sim/event_loop.hpp"
#include "util/bytes.hpp"
#include "util/hash.hpp"
#include "util/result.hpp"

namespace cfs::harness {

enum class HOp : uint8_t {
  Open,
  Read,
  Write,
  Fsync,
  Dsync,
  Unlink,
  Rename,
  Mkdir,
  Readdir,
  Stat,
  Truncate,
};

const char* hop_name(HOp op);

// One operation record: invocation and response on the simulated clock,
// arguments, and an oracle-comparable result summary.
struct HistoryOp {
  uint64_t id = 0;
  std::string proc;
  HOp op = HOp::Read;
  std::string path, path2;
  uint64_t off = 0, len = 0;
  uint32_t flags = 0, mode = 0644;
  Bytes data;

  sim::Time invoke = 0, response = 0;
  bool completed = false;

  Err err = Err::Ok;
  uint64_t r_count = 0;  // bytes written, entries listed
  uint64_t r_hash = 0;   // read payload / readdir names fingerprint
  uint64_t r_size = 0;   // stat size
};

struct History {
  std::vector<HistoryOp> ops;

  HistoryOp* begin_op(const std::string& proc, HOp op, sim::Time now) {
    HistoryOp rec;
    rec.id = ops.size();
    rec.proc = proc;
    rec.op = op;
    rec.invoke = now;
    ops.push_back(rec);
    return &ops.back();
  }

  bool well_formed() const {
    for (const auto& op : ops) {
      if (op.completed && op.response < op.invoke) return false;
    }
    return true;
  }

  std::vector<const HistoryOp*> completed() const {
    std::vector<const HistoryOp*> out;
    for (const auto& op : ops) {
      if (op.completed) out.push_back(&op);
    }
    return out;
  }
};

inline uint64_t names_hash(const std::vector<std::string>& names) {
  Hasher h;
  for (const auto& n : names) h.str(n);
  return h.digest();
}

}  // namespace cfs::harness
