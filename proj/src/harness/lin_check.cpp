/*
 * lin_check.cpp
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

#include "harness/lin_check.hpp"

#include <algorithm>
#include <set>

namespace cfs::harness {

const char* hop_name(HOp op) {
  switch (op) {
    case HOp::Open: return "open";
    case HOp::Read: return "read";
    case HOp::Write: return "write";
    case HOp::Fsync: return "fsync";
    case HOp::Dsync: return "dsync";
    case HOp::Unlink: return "unlink";
    case HOp::Rename: return "rename";
    case HOp::Mkdir: return "mkdir";
    case HOp::Readdir: return "readdir";
    case HOp::Stat: return "stat";
    case HOp::Truncate: return "truncate";
  }
  return "?";
}

bool LinChecker::apply_matches(fs::RefFs& ref, const HistoryOp& op,
                               const fs::Cred& cred) {
  switch (op.op) {
    case HOp::Open: {
      auto r = ref.open_check(cred, op.path, op.flags & 2, op.flags & 4,
                              op.flags & 8, op.flags & 16, op.mode);
      return (r.ok() ? Err::Ok : r.error()) == op.err;
    }
    case HOp::Read: {
      auto r = ref.pread(cred, op.path, op.off, op.len);
      if (!r.ok()) return r.error() == op.err;
      if (op.err != Err::Ok) return false;
      return Hasher{}.bytes(*r).digest() == op.r_hash;
    }
    case HOp::Write: {
      // Recorded writes open with O_CREAT, creating the file on demand.
      auto o = ref.open_check(cred, op.path, true, true, false, false, 0644);
      if (!o.ok()) return o.error() == op.err;
      auto r = ref.pwrite(cred, op.path, op.off, op.data);
      if (!r.ok()) return r.error() == op.err;
      if (op.err != Err::Ok) return false;
      return *r == op.r_count;
    }
    case HOp::Fsync:
    case HOp::Dsync:
      return true;  // no sequential-state effect
    case HOp::Unlink: {
      auto r = ref.unlink(cred, op.path);
      return (r.ok() ? Err::Ok : r.error()) == op.err;
    }
    case HOp::Rename: {
      auto r = ref.rename(cred, op.path, op.path2);
      return (r.ok() ? Err::Ok : r.error()) == op.err;
    }
    case HOp::Mkdir: {
      auto r = ref.mkdir(cred, op.path, op.mode);
      return (r.ok() ? Err::Ok : r.error()) == op.err;
    }
    case HOp::Readdir: {
      auto r = ref.readdir(cred, op.path);
      if (!r.ok()) return r.error() == op.err;
      if (op.err != Err::Ok) return false;
      return names_hash(*r) == op.r_hash;
    }
    case HOp::Stat: {
      auto r = ref.stat(cred, op.path);
      if (!r.ok()) return r.error() == op.err;
      if (op.err != Err::Ok) return false;
      return r->size == op.r_size;
    }
    case HOp::Truncate: {
      auto r = ref.truncate(cred, op.path, op.len);
      return (r.ok() ? Err::Ok : r.error()) == op.err;
    }
  }
  return false;
}

namespace {

struct Frame {
  uint32_t mask;
  fs::RefFs state;
};

}  // namespace

bool LinChecker::search(const std::vector<HistoryOp>& ops,
                        const std::map<std::string, fs::Cred>& creds,
                        uint64_t* states) const {
  const size_t n = ops.size();
  CFS_ASSERT(n <= 31);
  fs::RefFs initial;
  for (const auto& r : roots_) initial.add_root_dir(r);

  // Depth-first over linearization orders with (mask, state-hash)
  // memoization. Real-time order: op i may come next only if every other
  // pending op j does not satisfy response(j) < invoke(i).
  std::set<std::pair<uint32_t, uint64_t>> seen;
  std::vector<Frame> stack;
  stack.push_back(Frame{0, initial});
  const uint32_t full = n == 31 ? 0x7FFFFFFFu : ((1u << n) - 1);

  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.mask == full) return true;
    if (++*states > bound_) return false;

    for (size_t i = 0; i < n; i++) {
      if (f.mask & (1u << i)) continue;
      bool minimal = true;
      for (size_t j = 0; j < n; j++) {
        if (i == j || (f.mask & (1u << j))) continue;
        if (ops[j].response < ops[i].invoke) {
          minimal = false;
          break;
        }
      }
      if (!minimal) continue;
      fs::RefFs next = f.state;
      auto cit = creds.find(ops[i].proc);
      fs::Cred cred = cit == creds.end() ? fs::Cred{0, 0} : cit->second;
      if (!apply_matches(next, ops[i], cred)) continue;
      uint32_t mask = f.mask | (1u << i);
      auto key = std::make_pair(mask, next.state_hash());
      if (!seen.insert(key).second) continue;
      stack.push_back(Frame{mask, std::move(next)});
    }
  }
  return false;
}

LinResult LinChecker::check(const std::vector<HistoryOp>& ops,
                            const std::map<std::string, fs::Cred>& creds) const {
  LinResult out;
  if (ops.size() > 31) {
    out.bound_exceeded = true;
    return out;
  }
  out.linearizable = search(ops, creds, &out.states_explored);
  if (out.states_explored > bound_) {
    out.bound_exceeded = true;
    out.linearizable = false;
    return out;
  }
  if (!out.linearizable) {
    // Minimal violating sub-history: shortest prefix in response order
    // that already fails.
    std::vector<HistoryOp> sorted = ops;
    std::sort(sorted.begin(), sorted.end(),
              [](const HistoryOp& a, const HistoryOp& b) {
                if (a.response != b.response) return a.response < b.response;
                return a.id < b.id;
              });
    for (size_t k = 1; k <= sorted.size(); k++) {
      std::vector<HistoryOp> prefix(sorted.begin(), sorted.begin() + k);
      uint64_t states = 0;
      if (!search(prefix, creds, &states)) {
        out.witness = prefix;
        break;
      }
    }
  }
  return out;
}

}  // namespace cfs::harness
