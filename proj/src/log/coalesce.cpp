/*
 * coalesce.cpp
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

#include "log/coalesce.hpp"

#include <map>
#include <set>

#include "util/interval_set.hpp"

namespace cfs::log {

namespace {

constexpr uint64_t kInf = ~uint64_t{0};

struct InodeTouch {
  bool created = false;
  bool unlinked = false;
  bool renamed = false;  // subject or clobber victim of a rename
  bool first_is_create = false;
  bool last_is_unlink = false;
  bool touched = false;
};

}  // namespace

std::vector<LogEntry> coalesce(const std::vector<LogEntry>& entries) {
  // Pass 1: create..unlink cancellation candidates.
  std::map<fs::InodeNum, InodeTouch> touch;
  for (const auto& e : entries) {
    InodeTouch& t = touch[e.inode];
    if (!t.touched) {
      t.touched = true;
      t.first_is_create = e.kind == OpKind::Create || e.kind == OpKind::Mkdir;
    }
    t.last_is_unlink = e.kind == OpKind::Unlink;
    if (e.kind == OpKind::Create || e.kind == OpKind::Mkdir) t.created = true;
    if (e.kind == OpKind::Unlink) t.unlinked = true;
    if (e.kind == OpKind::Rename) {
      touch[e.inode].renamed = true;
      if (auto args = e.rename_args(); args.ok() && args->replaced_ino != 0) {
        touch[args->replaced_ino].renamed = true;
      }
    }
  }
  std::set<fs::InodeNum> cancelled;
  for (const auto& [ino, t] : touch) {
    if (t.created && t.unlinked && t.first_is_create && t.last_is_unlink &&
        !t.renamed) {
      cancelled.insert(ino);
    }
  }

  // Pass 2 (reverse): byte-range shadowing.
  std::map<fs::InodeNum, IntervalSet> shadow;
  std::set<fs::InodeNum> setattr_seen;
  // Survivors in reverse order; each input entry may expand into several
  // trimmed sub-writes.
  std::vector<LogEntry> rev;
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    const LogEntry& e = *it;
    if (cancelled.count(e.inode)) continue;
    switch (e.kind) {
      case OpKind::Write: {
        uint64_t begin = e.offset, end = e.offset + e.payload.size();
        auto keep = shadow[e.inode].uncovered(begin, end);
        // Emit trimmed slices in reverse offset order so the final forward
        // order is ascending within the original entry.
        for (auto kit = keep.rbegin(); kit != keep.rend(); ++kit) {
          LogEntry part = e;
          part.offset = kit->first;
          part.payload.assign(e.payload.begin() + (kit->first - begin),
                              e.payload.begin() + (kit->second - begin));
          rev.push_back(std::move(part));
        }
        shadow[e.inode].add(begin, end);
        break;
      }
      case OpKind::Truncate:
        rev.push_back(e);
        // Earlier bytes at or beyond the new size do not survive this
        // truncate, whether it shrinks or grows.
        shadow[e.inode].add(e.offset, kInf);
        break;
      case OpKind::SetAttr:
        if (!setattr_seen.count(e.inode)) {
          setattr_seen.insert(e.inode);
          rev.push_back(e);
        }
        break;
      case OpKind::Create:
      case OpKind::Mkdir:
      case OpKind::Unlink:
      case OpKind::Rename:
        rev.push_back(e);
        break;
    }
  }
  return {rev.rbegin(), rev.rend()};
}

}  // namespace cfs::log
