/*
 * entry.hpp
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

#include "fs/types.hpp"
#include "util/bytes.hpp"
#include "util/result.hpp"

namespace cfs::log {

enum class OpKind : uint8_t {
  Write = 1,
  Create = 2,
  Unlink = 3,
  Rename = 4,
  Mkdir = 5,
  Truncate = 6,
  SetAttr = 7,
};

const char* op_kind_name(OpKind k);

// Entry flags.
constexpr uint16_t kFlagTxnLast = 0x1;  // final entry of its transaction

// One POSIX-level mutation record. On media this is a fixed 64 byte
// little-endian header followed by the payload, padded to 8 bytes:
//
//   off  0  u32  magic "CLOG"
//   off  4  u8   version (1)
//   off  5  u8   op kind
//   off  6  u16  flags
//   off  8  u64  seq
//   off 16  u64  txn id
//   off 24  u64  inode
//   off 32  u64  offset (write offset; new size for truncate)
//   off 40  u64  mtime (simulated ns)
//   off 48  u32  payload length
//   off 52  u32  subtree id
//   off 56  u32  reserved (0)
//   off 60  u32  crc32c over header[0..60) plus payload
//
// Payload by kind:
//   Write:        data bytes
//   Create/Mkdir: parent u64, mode u32, uid u32, gid u32, name str
//   Unlink:       parent u64, name str
//   Rename:       src_parent u64, dst_parent u64, replaced_ino u64,
//                 src_name str, dst_name str
//   SetAttr:      mode u32, uid u32, gid u32
//   Truncate:     empty
struct LogEntry {
  uint64_t seq = 0;
  uint64_t txn = 0;
  OpKind kind = OpKind::Write;
  uint16_t flags = kFlagTxnLast;
  fs::InodeNum inode = 0;
  uint64_t offset = 0;
  uint64_t mtime = 0;
  uint32_t subtree = 0;
  Bytes payload;

  bool txn_last() const { return (flags & kFlagTxnLast) != 0; }

  // Structured payload accessors.
  struct CreateArgs {
    fs::InodeNum parent;
    fs::Attrs attrs;
    std::string name;
  };
  struct UnlinkArgs {
    fs::InodeNum parent;
    std::string name;
  };
  struct RenameArgs {
    fs::InodeNum src_parent;
    fs::InodeNum dst_parent;
    fs::InodeNum replaced_ino;  // inode clobbered at the destination, or 0
    std::string src_name;
    std::string dst_name;
  };

  static Bytes pack_create(const CreateArgs& a);
  static Bytes pack_unlink(const UnlinkArgs& a);
  static Bytes pack_rename(const RenameArgs& a);
  static Bytes pack_setattr(const fs::Attrs& a);

  Result<CreateArgs> create_args() const;
  Result<UnlinkArgs> unlink_args() const;
  Result<RenameArgs> rename_args() const;
  Result<fs::Attrs> setattr_args() const;
};

constexpr size_t kEntryHeaderSize = 64;
constexpr uint32_t kEntryMagic = 0x474F4C43;  // "CLOG"

// Total on-media size for an entry with `payload_len` payload bytes.
inline size_t entry_media_size(size_t payload_len) {
  size_t n = kEntryHeaderSize + payload_len;
  return (n + 7) & ~size_t{7};
}

Bytes encode_entry(const LogEntry& e);

// Decodes one entry at `p`. Returns the entry and sets `consumed`, or an
// error when the bytes do not hold a well-formed, checksummed entry.
Result<LogEntry> decode_entry(const uint8_t* p, size_t avail, size_t* consumed);

}  // namespace cfs::log
