/*
 * ref_fs.cpp
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

#include "fs/ref_fs.hpp"

#include <algorithm>

namespace cfs::fs {

Result<InodeNum> RefFs::resolve(const std::string& path) const {
  if (!path_valid(path)) return Err::EINVAL_;
  InodeNum cur = kRootInode;
  for (const auto& comp : path_components(path)) {
    const FsImage::Node* n = img_.find(cur);
    if (!n) return Err::ENOENT_;
    if (n->kind != FileKind::Dir) return Err::ENOTDIR_;
    auto it = n->dirents.find(comp);
    if (it == n->dirents.end()) return Err::ENOENT_;
    cur = it->second;
  }
  return cur;
}

Result<InodeNum> RefFs::resolve_parent(const std::string& path) const {
  if (!path_valid(path) || path == "/") return Err::EINVAL_;
  return resolve(parent_path(path));
}

void RefFs::add_root_dir(const std::string& path) {
  auto parent = resolve(parent_path(path));
  CFS_ASSERT(parent.ok());
  InodeNum ino = next_ino_++;
  FsImage::Node d;
  d.kind = FileKind::Dir;
  d.attrs.mode = 0777;
  img_.nodes[ino] = d;
  img_.nodes.at(*parent).dirents[base_name(path)] = ino;
}

Result<Unit> RefFs::create(const Cred& c, const std::string& path,
                           uint32_t mode) {
  auto parent = resolve_parent(path);
  if (!parent.ok()) return parent.error();
  FsImage::Node& p = *img_.find(*parent);
  if (p.kind != FileKind::Dir) return Err::ENOTDIR_;
  if (!can_access(p.attrs, c, true)) return Err::EACCES_;
  if (p.dirents.count(base_name(path))) return Err::EEXIST_;
  InodeNum ino = next_ino_++;
  FsImage::Node f;
  f.kind = FileKind::File;
  f.attrs = Attrs{mode, c.uid, c.gid};
  img_.nodes[ino] = f;
  p.dirents[base_name(path)] = ino;
  return Unit{};
}

Result<Unit> RefFs::mkdir(const Cred& c, const std::string& path,
                          uint32_t mode) {
  auto parent = resolve_parent(path);
  if (!parent.ok()) return parent.error();
  FsImage::Node& p = *img_.find(*parent);
  if (p.kind != FileKind::Dir) return Err::ENOTDIR_;
  if (!can_access(p.attrs, c, true)) return Err::EACCES_;
  if (p.dirents.count(base_name(path))) return Err::EEXIST_;
  InodeNum ino = next_ino_++;
  FsImage::Node d;
  d.kind = FileKind::Dir;
  d.attrs = Attrs{mode, c.uid, c.gid};
  img_.nodes[ino] = d;
  p.dirents[base_name(path)] = ino;
  return Unit{};
}

Result<Bytes> RefFs::pread(const Cred& c, const std::string& path,
                           uint64_t off, uint64_t len) {
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  const FsImage::Node& n = *img_.find(*ino);
  if (n.kind == FileKind::Dir) return Err::EISDIR_;
  if (!can_access(n.attrs, c, false)) return Err::EACCES_;
  if (off >= n.size) return Bytes{};
  uint64_t end = std::min(off + len, n.size);
  Bytes out(end - off, 0);
  for (uint64_t i = off; i < end && i < n.data.size(); i++) {
    out[i - off] = n.data[i];
  }
  return out;
}

Result<uint64_t> RefFs::pwrite(const Cred& c, const std::string& path,
                               uint64_t off, const Bytes& data) {
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  FsImage::Node& n = *img_.find(*ino);
  if (n.kind == FileKind::Dir) return Err::EISDIR_;
  if (!can_access(n.attrs, c, true)) return Err::EACCES_;
  uint64_t end = off + data.size();
  if (n.data.size() < end) n.data.resize(end, 0);
  std::copy(data.begin(), data.end(), n.data.begin() + off);
  if (n.size < end) n.size = end;
  return data.size();
}

Result<Unit> RefFs::unlink(const Cred& c, const std::string& path) {
  auto parent = resolve_parent(path);
  if (!parent.ok()) return parent.error();
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  FsImage::Node& p = *img_.find(*parent);
  if (!can_access(p.attrs, c, true)) return Err::EACCES_;
  FsImage::Node& n = *img_.find(*ino);
  if (n.kind == FileKind::Dir && !n.dirents.empty()) return Err::ENOTEMPTY_;
  p.dirents.erase(base_name(path));
  img_.nodes.erase(*ino);
  return Unit{};
}

Result<Unit> RefFs::rename(const Cred& c, const std::string& from,
                           const std::string& to) {
  auto src_parent = resolve_parent(from);
  if (!src_parent.ok()) return src_parent.error();
  auto ino = resolve(from);
  if (!ino.ok()) return ino.error();
  auto dst_parent = resolve_parent(to);
  if (!dst_parent.ok()) return dst_parent.error();
  FsImage::Node& sp = *img_.find(*src_parent);
  FsImage::Node& dp = *img_.find(*dst_parent);
  if (dp.kind != FileKind::Dir) return Err::ENOTDIR_;
  if (!can_access(sp.attrs, c, true) || !can_access(dp.attrs, c, true)) {
    return Err::EACCES_;
  }
  // Moving a directory under itself is invalid.
  if (img_.find(*ino)->kind == FileKind::Dir &&
      path_is_or_under(to, from)) {
    return Err::EINVAL_;
  }
  auto dst_it = dp.dirents.find(base_name(to));
  if (dst_it != dp.dirents.end()) {
    FsImage::Node* existing = img_.find(dst_it->second);
    if (existing->kind == FileKind::Dir) {
      if (!existing->dirents.empty()) return Err::ENOTEMPTY_;
    }
    img_.nodes.erase(dst_it->second);
  }
  sp.dirents.erase(base_name(from));
  img_.find(*dst_parent)->dirents[base_name(to)] = *ino;
  return Unit{};
}

Result<Unit> RefFs::truncate(const Cred& c, const std::string& path,
                             uint64_t size) {
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  FsImage::Node& n = *img_.find(*ino);
  if (n.kind == FileKind::Dir) return Err::EISDIR_;
  if (!can_access(n.attrs, c, true)) return Err::EACCES_;
  n.data.resize(size, 0);
  n.size = size;
  return Unit{};
}

Result<Unit> RefFs::setattr(const Cred& c, const std::string& path,
                            Attrs attrs) {
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  FsImage::Node& n = *img_.find(*ino);
  if (c.uid != 0 && c.uid != n.attrs.uid) return Err::EACCES_;
  n.attrs = attrs;
  return Unit{};
}

Result<std::vector<std::string>> RefFs::readdir(const Cred& c,
                                                const std::string& path) {
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  const FsImage::Node& n = *img_.find(*ino);
  if (n.kind != FileKind::Dir) return Err::ENOTDIR_;
  if (!can_access(n.attrs, c, false)) return Err::EACCES_;
  std::vector<std::string> names;
  names.reserve(n.dirents.size());
  for (const auto& [name, child] : n.dirents) names.push_back(name);
  return names;
}

Result<RefFs::StatInfo> RefFs::stat(const Cred& c, const std::string& path) {
  (void)c;  // stat requires only path resolution
  auto ino = resolve(path);
  if (!ino.ok()) return ino.error();
  const FsImage::Node& n = *img_.find(*ino);
  return StatInfo{n.kind, n.size, n.attrs};
}

Result<Unit> RefFs::open_check(const Cred& c, const std::string& path,
                               bool write, bool creat, bool excl, bool trunc,
                               uint32_t mode) {
  auto ino = resolve(path);
  if (!ino.ok()) {
    if (ino.error() != Err::ENOENT_ || !creat) return ino.error();
    auto made = create(c, path, mode);
    if (!made.ok()) return made.error();
    return Unit{};
  }
  if (creat && excl) return Err::EEXIST_;
  const FsImage::Node& n = *img_.find(*ino);
  if (n.kind == FileKind::Dir && (write || trunc)) return Err::EISDIR_;
  if (!can_access(n.attrs, c, write)) return Err::EACCES_;
  if (trunc) {
    FsImage::Node& m = *img_.find(*ino);
    m.data.clear();
    m.size = 0;
  }
  return Unit{};
}

}  // namespace cfs::fs
