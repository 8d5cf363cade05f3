/*
 * types.hpp
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
#include <string>
#include <vector>

namespace cfs::fs {

using InodeNum = uint64_t;

constexpr InodeNum kRootInode = 1;

enum class FileKind : uint8_t { File = 0, Dir = 1 };

struct Attrs {
  uint32_t mode = 0644;
  uint32_t uid = 0;
  uint32_t gid = 0;
};

struct Cred {
  uint32_t uid = 0;
  uint32_t gid = 0;
};

// Crash-consistency mode of a mount: fsync replicates synchronously in
// pessimistic mode; optimistic mode defers replication to dsync.
enum class Mode : uint8_t { Pessimistic = 0, Optimistic = 1 };

// Provenance tier of a read, ordered by distance from the process.
enum class ReadTier : uint8_t {
  PrivateLog = 0,
  DramCache = 1,
  LocalHotNvm = 2,
  ReserveNvm = 3,
  LocalSsd = 4,
  RemoteNvm = 5,
  Hole = 6,
};

inline const char* read_tier_name(ReadTier t) {
  switch (t) {
    case ReadTier::PrivateLog: return "private-log";
    case ReadTier::DramCache: return "dram-cache";
    case ReadTier::LocalHotNvm: return "local-hot-nvm";
    case ReadTier::ReserveNvm: return "reserve-nvm";
    case ReadTier::LocalSsd: return "local-ssd";
    case ReadTier::RemoteNvm: return "remote-nvm";
    case ReadTier::Hole: return "hole";
  }
  return "?";
}

inline bool can_access(const Attrs& a, const Cred& c, bool write) {
  if (c.uid == 0) return true;
  uint32_t bits;
  if (c.uid == a.uid) bits = (a.mode >> 6) & 7;
  else if (c.gid == a.gid) bits = (a.mode >> 3) & 7;
  else bits = a.mode & 7;
  return write ? (bits & 2) != 0 : (bits & 4) != 0;
}

// Paths are normalized absolute strings: "/", "/a", "/a/b". No trailing
// slash except the root itself.
inline std::vector<std::string> path_components(const std::string& path) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') i++;
    size_t j = i;
    while (j < path.size() && path[j] != '/') j++;
    if (j > i) out.push_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool path_valid(const std::string& path) {
  if (path.empty() || path[0] != '/') return false;
  if (path.size() > 1 && path.back() == '/') return false;
  if (path.find("//") != std::string::npos) return false;
  for (const auto& c : path_components(path)) {
    if (c == "." || c == "..") return false;
  }
  return true;
}

inline std::string parent_path(const std::string& path) {
  if (path == "/") return "/";
  size_t pos = path.rfind('/');
  return pos == 0 ? "/" : path.substr(0, pos);
}

inline std::string base_name(const std::string& path) {
  size_t pos = path.rfind('/');
  return path.substr(pos + 1);
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return dir == "/" ? "/" + name : dir + "/" + name;
}

// Component-wise ancestor test: "/a" covers "/a/b" but not "/ab".
inline bool path_is_or_under(const std::string& path, const std::string& root) {
  if (root == "/") return true;
  if (path == root) return true;
  return path.size() > root.size() && path.compare(0, root.size(), root) == 0 &&
         path[root.size()] == '/';
}

}  // namespace cfs::fs
