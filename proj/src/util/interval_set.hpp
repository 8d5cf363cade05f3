/*
 * interval_set.hpp
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

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "util/assert.hpp"

namespace cfs {

// Set of disjoint half-open byte ranges [begin, end), merged on insert.
class IntervalSet {
 public:
  void add(uint64_t begin, uint64_t end) {
    if (begin >= end) return;
    // Absorb every range that touches [begin, end).
    auto it = ranges_.lower_bound(begin);
    if (it != ranges_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= begin) it = prev;
    }
    while (it != ranges_.end() && it->first <= end) {
      begin = std::min(begin, it->first);
      end = std::max(end, it->second);
      it = ranges_.erase(it);
    }
    ranges_[begin] = end;
  }

  bool empty() const { return ranges_.empty(); }

  bool contains(uint64_t begin, uint64_t end) const {
    if (begin >= end) return true;
    auto it = ranges_.upper_bound(begin);
    if (it == ranges_.begin()) return false;
    --it;
    return it->first <= begin && end <= it->second;
  }

  bool intersects(uint64_t begin, uint64_t end) const {
    if (begin >= end) return false;
    auto it = ranges_.lower_bound(begin);
    if (it != ranges_.end() && it->first < end) return true;
    if (it == ranges_.begin()) return false;
    --it;
    return it->second > begin;
  }

  // Parts of [begin, end) not covered by the set, in ascending order.
  std::vector<std::pair<uint64_t, uint64_t>> uncovered(uint64_t begin,
                                                       uint64_t end) const {
    std::vector<std::pair<uint64_t, uint64_t>> out;
    if (begin >= end) return out;
    uint64_t pos = begin;
    auto it = ranges_.upper_bound(begin);
    if (it != ranges_.begin()) {
      auto prev = std::prev(it);
      if (prev->second > pos) pos = std::min(end, prev->second);
    }
    for (; pos < end && it != ranges_.end() && it->first < end; ++it) {
      if (it->first > pos) out.emplace_back(pos, it->first);
      pos = std::max(pos, std::min(end, it->second));
    }
    if (pos < end) out.emplace_back(pos, end);
    return out;
  }

  const std::map<uint64_t, uint64_t>& ranges() const { return ranges_; }

 private:
  std::map<uint64_t, uint64_t> ranges_;  // begin -> end
};

}  // namespace cfs
