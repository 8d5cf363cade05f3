/*
 * fs_image.hpp
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

#include "fs/types.hpp"
#include "log/entry.hpp"
#include "util/bytes.hpp"
#include "util/hash.hpp"
#include "util/result.hpp"

namespace cfs::fs {

// Inode-level file system state. This is the common logical currency of
// the repo: digested shared areas export one, the prefix oracle replays
// update-log entries into one, and equality is decided by state_hash().
struct FsImage {
  struct Node {
    FileKind kind = FileKind::File;
    Attrs attrs;
    uint64_t size = 0;
    uint64_t mtime = 0;
    uint32_t subtree = 0;
    Bytes data;                                // files
    std::map<std::string, InodeNum> dirents;   // directories
  };

  std::map<InodeNum, Node> nodes;

  FsImage() {
    Node root;
    root.kind = FileKind::Dir;
    root.attrs.mode = 0755;
    nodes[kRootInode] = root;
  }

  bool has(InodeNum ino) const { return nodes.count(ino) != 0; }
  Node* find(InodeNum ino) {
    auto it = nodes.find(ino);
    return it == nodes.end() ? nullptr : &it->second;
  }
  const Node* find(InodeNum ino) const {
    auto it = nodes.find(ino);
    return it == nodes.end() ? nullptr : &it->second;
  }

  // Pre-creates a directory inode (subtree roots at world build time).
  // Mode matches the kernfs bootstrap exactly: state hashes must agree.
  void add_dir(InodeNum parent, InodeNum ino, const std::string& name,
               uint32_t subtree) {
    Node d;
    d.kind = FileKind::Dir;
    d.attrs.mode = 0777;
    d.subtree = subtree;
    nodes[ino] = d;
    nodes.at(parent).dirents[name] = ino;
  }

  // Applies one update-log entry. Tolerant of re-application after a crash:
  // replaying a prefix twice converges to the same state.
  Status apply(const log::LogEntry& e);

  uint64_t state_hash() const { return state_hash_filtered(nullptr); }
  // Hash restricted to inodes of one subtree (0 means all).
  uint64_t state_hash_subtree(uint32_t subtree) const {
    return state_hash_filtered(&subtree);
  }

 private:
  uint64_t state_hash_filtered(const uint32_t* subtree) const;
};

}  // namespace cfs::fs
