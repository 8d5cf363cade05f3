/*
 * ref_fs.hpp
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

#include "fs/fs_image.hpp"
#include "fs/types.hpp"

namespace cfs::fs {

// Sequential in-memory POSIX-subset specification. This is the executable
// oracle the linearizability checker runs histories against; the simulated
// file system must be indistinguishable from some sequential execution of
// this one.
class RefFs {
 public:
  struct StatInfo {
    FileKind kind;
    uint64_t size;
    Attrs attrs;
    bool operator==(const StatInfo&) const = default;
  };

  RefFs() = default;

  // Pre-creates a directory (subtree roots; mirrors the world bootstrap).
  void add_root_dir(const std::string& path);

  Result<Unit> create(const Cred& c, const std::string& path, uint32_t mode);
  Result<Unit> mkdir(const Cred& c, const std::string& path, uint32_t mode);
  Result<Bytes> pread(const Cred& c, const std::string& path, uint64_t off,
                      uint64_t len);
  Result<uint64_t> pwrite(const Cred& c, const std::string& path, uint64_t off,
                          const Bytes& data);
  Result<Unit> unlink(const Cred& c, const std::string& path);
  Result<Unit> rename(const Cred& c, const std::string& from,
                      const std::string& to);
  Result<Unit> truncate(const Cred& c, const std::string& path, uint64_t size);
  Result<Unit> setattr(const Cred& c, const std::string& path, Attrs attrs);
  Result<std::vector<std::string>> readdir(const Cred& c,
                                           const std::string& path);
  Result<StatInfo> stat(const Cred& c, const std::string& path);
  // open validates existence/kind/permission; O_CREAT creates.
  Result<Unit> open_check(const Cred& c, const std::string& path, bool write,
                          bool creat, bool excl, bool trunc, uint32_t mode);

  uint64_t state_hash() const { return img_.state_hash(); }
  const FsImage& image() const { return img_; }

 private:
  Result<InodeNum> resolve(const std::string& path) const;
  Result<InodeNum> resolve_parent(const std::string& path) const;

  FsImage img_;
  InodeNum next_ino_ = 1000000;  // distinct from simulated inode ranges
};

}  // namespace cfs::fs
