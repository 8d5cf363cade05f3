/*
 * read_cache.hpp
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

#include <list>
#include <map>
#include <optional>
#include <set>

#include "fs/types.hpp"
#include "media/media.hpp"

namespace cfs::fs {

// Process-local DRAM read cache of 4KB blocks over a volatile region.
// Only data fetched from remote NVM or cold storage is cached; local NVM
// reads bypass it. Blocks touched by local writes are marked dirty and may
// need a write-back through the update log when evicted.
class ReadCache {
 public:
  static constexpr uint64_t kBlock = 4096;

  ReadCache(media::MediaStore& media, media::RegionId region)
      : media_(media), region_(region) {
    slots_ = media_.capacity(region_) / kBlock;
    CFS_ASSERT(slots_ > 0);
  }

  media::RegionId region() const { return region_; }

  struct Evicted {
    InodeNum ino = 0;
    uint64_t block = 0;
    uint64_t slot = 0;
    bool dirty = false;
    Bytes data;
  };

  bool lookup(InodeNum ino, uint64_t block, Bytes* out) {
    auto it = map_.find({ino, block});
    if (it == map_.end() || !it->second->valid) return false;
    touch(it->second);
    auto r = media_.read(region_, it->second->slot * kBlock, kBlock);
    CFS_ASSERT(r.ok());
    *out = std::move(r.value());
    return true;
  }

  // Inserts or refreshes a block; returns the victim when one fell out.
  std::optional<Evicted> fill(InodeNum ino, uint64_t block, const Bytes& data,
                              bool dirty) {
    CFS_ASSERT(data.size() == kBlock);
    std::optional<Evicted> out;
    auto it = map_.find({ino, block});
    if (it == map_.end()) {
      uint64_t slot;
      if (!free_slots_.empty()) {
        slot = free_slots_.back();
        free_slots_.pop_back();
      } else if (used_slots_ < slots_) {
        slot = used_slots_++;
      } else {
        out = evict_lru();
        slot = out->slot;
      }
      lru_.push_front(Entry{ino, block, slot, dirty, true});
      map_[{ino, block}] = lru_.begin();
    } else {
      touch(it->second);
      it->second->dirty = it->second->dirty || dirty;
      it->second->valid = true;
    }
    auto cur = map_.find({ino, block});
    media_.write_persistent(region_, cur->second->slot * kBlock, data);
    return out;
  }

  // Reserves a slot for an in-flight remote fill. The entry stays invalid
  // (invisible to lookups) until confirm().
  struct Prepared {
    uint64_t offset = 0;
    std::optional<Evicted> evicted;
  };
  Prepared prepare(InodeNum ino, uint64_t block) {
    Prepared out;
    auto it = map_.find({ino, block});
    if (it != map_.end()) {
      it->second->valid = false;
      out.offset = it->second->slot * kBlock;
      return out;
    }
    uint64_t slot;
    if (!free_slots_.empty()) {
      slot = free_slots_.back();
      free_slots_.pop_back();
    } else if (used_slots_ < slots_) {
      slot = used_slots_++;
    } else {
      out.evicted = evict_lru();
      slot = out.evicted->slot;
    }
    lru_.push_front(Entry{ino, block, slot, false, false});
    map_[{ino, block}] = lru_.begin();
    out.offset = slot * kBlock;
    return out;
  }
  void confirm(InodeNum ino, uint64_t block) {
    auto it = map_.find({ino, block});
    if (it == map_.end()) return;
    it->second->valid = true;
    touch(it->second);
  }
  void abandon(InodeNum ino, uint64_t block) {
    auto it = map_.find({ino, block});
    if (it == map_.end()) return;
    release_slot(it->second->slot);
    lru_.erase(it->second);
    map_.erase(it);
  }

  // Updates overlapping cached bytes in place after a local write.
  void update(InodeNum ino, uint64_t off, const Bytes& data) {
    if (data.empty()) return;
    uint64_t first = off / kBlock, last = (off + data.size() - 1) / kBlock;
    for (uint64_t b = first; b <= last; b++) {
      auto it = map_.find({ino, b});
      if (it == map_.end()) continue;
      uint64_t block_base = b * kBlock;
      uint64_t from = std::max(off, block_base);
      uint64_t to = std::min(off + data.size(), block_base + kBlock);
      Bytes slice(data.begin() + (from - off), data.begin() + (to - off));
      media_.write_persistent(
          region_, it->second->slot * kBlock + (from - block_base), slice);
      it->second->dirty = true;
    }
  }

  void invalidate_inode(InodeNum ino) {
    for (auto it = map_.begin(); it != map_.end();) {
      if (it->first.first == ino) {
        release_slot(it->second->slot);
        lru_.erase(it->second);
        it = map_.erase(it);
      } else {
        ++it;
      }
    }
  }

  // A slot with an in-flight prefetch trailer must not be reassigned: the
  // trailing write would corrupt its next occupant.
  void pin_slot(uint64_t slot) { slot_pins_[slot]++; }
  void unpin_slot(uint64_t slot) {
    auto it = slot_pins_.find(slot);
    CFS_ASSERT(it != slot_pins_.end() && it->second > 0);
    if (--it->second == 0) {
      slot_pins_.erase(it);
      if (orphaned_.count(slot)) {
        orphaned_.erase(slot);
        free_slots_.push_back(slot);
      }
    }
  }
  uint64_t slot_of(InodeNum ino, uint64_t block) const {
    auto it = map_.find({ino, block});
    CFS_ASSERT(it != map_.end());
    return it->second->slot;
  }

  void clear() {
    map_.clear();
    lru_.clear();
    free_slots_.clear();
    used_slots_ = 0;
  }

  bool cached(InodeNum ino, uint64_t block) const {
    return map_.count({ino, block}) != 0;
  }
  size_t size() const { return map_.size(); }

 private:
  struct Entry {
    InodeNum ino;
    uint64_t block;
    uint64_t slot;
    bool dirty;
    bool valid = true;  // false while a remote fill is in flight
  };

  void touch(std::list<Entry>::iterator it) {
    lru_.splice(lru_.begin(), lru_, it);
  }

  void release_slot(uint64_t slot) {
    if (slot_pins_.count(slot)) {
      orphaned_.insert(slot);
    } else {
      free_slots_.push_back(slot);
    }
  }

  Evicted evict_lru() {
    CFS_ASSERT(!lru_.empty());
    // Never evict an entry whose remote fill or trailer is in flight.
    auto vit = std::prev(lru_.end());
    while ((!vit->valid || slot_pins_.count(vit->slot)) &&
           vit != lru_.begin()) {
      --vit;
    }
    CFS_ASSERT(vit->valid && !slot_pins_.count(vit->slot));
    Entry victim = *vit;
    lru_.erase(vit);
    map_.erase({victim.ino, victim.block});
    auto data = media_.read(region_, victim.slot * kBlock, kBlock);
    CFS_ASSERT(data.ok());
    Evicted ev;
    ev.ino = victim.ino;
    ev.block = victim.block;
    ev.slot = victim.slot;
    ev.dirty = victim.dirty;
    ev.data = std::move(data.value());
    return ev;
  }

  media::MediaStore& media_;
  media::RegionId region_;
  uint64_t slots_ = 0;
  uint64_t used_slots_ = 0;
  std::vector<uint64_t> free_slots_;
  std::map<uint64_t, int> slot_pins_;
  std::set<uint64_t> orphaned_;
  std::list<Entry> lru_;
  std::map<std::pair<InodeNum, uint64_t>, std::list<Entry>::iterator> map_;
};

}  // namespace cfs::fs
