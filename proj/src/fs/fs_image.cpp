/*
 * fs_image.cpp
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

#include "fs/fs_image.hpp"

namespace cfs::fs {

using log::LogEntry;
using log::OpKind;

Status FsImage::apply(const LogEntry& e) {
  switch (e.kind) {
    case OpKind::Write: {
      Node& n = nodes[e.inode];  // implicit create tolerates replays
      n.kind = FileKind::File;
      n.subtree = e.subtree;
      uint64_t end = e.offset + e.payload.size();
      if (n.data.size() < end) n.data.resize(end, 0);
      std::copy(e.payload.begin(), e.payload.end(), n.data.begin() + e.offset);
      if (n.size < end) n.size = end;
      n.mtime = e.mtime;
      return Status{};
    }
    case OpKind::Create:
    case OpKind::Mkdir: {
      auto args = e.create_args();
      if (!args.ok()) return args.error();
      Node n;
      n.kind = e.kind == OpKind::Mkdir ? FileKind::Dir : FileKind::File;
      n.attrs = args->attrs;
      n.mtime = e.mtime;
      n.subtree = e.subtree;
      // Keep existing contents on replay.
      auto [it, fresh] = nodes.emplace(e.inode, n);
      if (!fresh) it->second.attrs = args->attrs;
      auto pit = nodes.find(args->parent);
      if (pit == nodes.end()) return Err::ENOENT_;
      pit->second.dirents[args->name] = e.inode;
      return Status{};
    }
    case OpKind::Unlink: {
      auto args = e.unlink_args();
      if (!args.ok()) return args.error();
      auto pit = nodes.find(args->parent);
      if (pit != nodes.end()) pit->second.dirents.erase(args->name);
      nodes.erase(e.inode);
      return Status{};
    }
    case OpKind::Rename: {
      auto args = e.rename_args();
      if (!args.ok()) return args.error();
      auto sp = nodes.find(args->src_parent);
      if (sp != nodes.end()) sp->second.dirents.erase(args->src_name);
      if (args->replaced_ino != 0) nodes.erase(args->replaced_ino);
      auto dp = nodes.find(args->dst_parent);
      if (dp == nodes.end()) return Err::ENOENT_;
      dp->second.dirents[args->dst_name] = e.inode;
      return Status{};
    }
    case OpKind::Truncate: {
      auto it = nodes.find(e.inode);
      if (it == nodes.end()) return Err::ENOENT_;
      Node& n = it->second;
      n.data.resize(e.offset, 0);
      n.size = e.offset;
      n.mtime = e.mtime;
      return Status{};
    }
    case OpKind::SetAttr: {
      auto args = e.setattr_args();
      if (!args.ok()) return args.error();
      auto it = nodes.find(e.inode);
      if (it == nodes.end()) return Err::ENOENT_;
      it->second.attrs = *args;
      it->second.mtime = e.mtime;
      return Status{};
    }
  }
  return Err::EINVAL_;
}

uint64_t FsImage::state_hash_filtered(const uint32_t* subtree) const {
  Hasher h;
  for (const auto& [ino, n] : nodes) {
    if (subtree && n.subtree != *subtree) continue;
    h.u64(ino);
    h.u8(static_cast<uint8_t>(n.kind));
    h.u64(n.attrs.mode);
    h.u64(n.attrs.uid);
    h.u64(n.attrs.gid);
    h.u64(n.size);
    h.u64(n.mtime);
    if (n.kind == FileKind::File) {
      // Hash logical contents up to size: trailing zeroes beyond the last
      // extent and a sparsely-represented hole are the same bytes.
      Bytes view = n.data;
      view.resize(n.size, 0);
      h.bytes(view);
    } else {
      h.u64(n.dirents.size());
      for (const auto& [name, child] : n.dirents) {
        h.str(name);
        h.u64(child);
      }
    }
  }
  return h.digest();
}

}  // namespace cfs::fs
