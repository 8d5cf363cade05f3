/*
 * entry.cpp
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

#include "log/entry.hpp"

#include <cstring>

#include "util/crc32c.hpp"

namespace cfs::log {

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Write: return "WRITE";
    case OpKind::Create: return "CREATE";
    case OpKind::Unlink: return "UNLINK";
    case OpKind::Rename: return "RENAME";
    case OpKind::Mkdir: return "MKDIR";
    case OpKind::Truncate: return "TRUNCATE";
    case OpKind::SetAttr: return "SETATTR";
  }
  return "?";
}

Bytes LogEntry::pack_create(const CreateArgs& a) {
  Bytes out;
  ByteWriter w(out);
  w.u64(a.parent);
  w.u32(a.attrs.mode);
  w.u32(a.attrs.uid);
  w.u32(a.attrs.gid);
  w.str(a.name);
  return out;
}

Bytes LogEntry::pack_unlink(const UnlinkArgs& a) {
  Bytes out;
  ByteWriter w(out);
  w.u64(a.parent);
  w.str(a.name);
  return out;
}

Bytes LogEntry::pack_rename(const RenameArgs& a) {
  Bytes out;
  ByteWriter w(out);
  w.u64(a.src_parent);
  w.u64(a.dst_parent);
  w.u64(a.replaced_ino);
  w.str(a.src_name);
  w.str(a.dst_name);
  return out;
}

Bytes LogEntry::pack_setattr(const fs::Attrs& a) {
  Bytes out;
  ByteWriter w(out);
  w.u32(a.mode);
  w.u32(a.uid);
  w.u32(a.gid);
  return out;
}

Result<LogEntry::CreateArgs> LogEntry::create_args() const {
  if (kind != OpKind::Create && kind != OpKind::Mkdir) return Err::EINVAL_;
  ByteReader r(payload);
  CreateArgs a;
  a.parent = r.u64();
  a.attrs.mode = r.u32();
  a.attrs.uid = r.u32();
  a.attrs.gid = r.u32();
  a.name = r.str();
  if (!r.ok()) return Err::ChecksumFailure;
  return a;
}

Result<LogEntry::UnlinkArgs> LogEntry::unlink_args() const {
  if (kind != OpKind::Unlink) return Err::EINVAL_;
  ByteReader r(payload);
  UnlinkArgs a;
  a.parent = r.u64();
  a.name = r.str();
  if (!r.ok()) return Err::ChecksumFailure;
  return a;
}

Result<LogEntry::RenameArgs> LogEntry::rename_args() const {
  if (kind != OpKind::Rename) return Err::EINVAL_;
  ByteReader r(payload);
  RenameArgs a;
  a.src_parent = r.u64();
  a.dst_parent = r.u64();
  a.replaced_ino = r.u64();
  a.src_name = r.str();
  a.dst_name = r.str();
  if (!r.ok()) return Err::ChecksumFailure;
  return a;
}

Result<fs::Attrs> LogEntry::setattr_args() const {
  if (kind != OpKind::SetAttr) return Err::EINVAL_;
  ByteReader r(payload);
  fs::Attrs a;
  a.mode = r.u32();
  a.uid = r.u32();
  a.gid = r.u32();
  if (!r.ok()) return Err::ChecksumFailure;
  return a;
}

Bytes encode_entry(const LogEntry& e) {
  Bytes out;
  out.reserve(entry_media_size(e.payload.size()));
  ByteWriter w(out);
  w.u32(kEntryMagic);
  w.u8(1);
  w.u8(static_cast<uint8_t>(e.kind));
  w.u16(e.flags);
  w.u64(e.seq);
  w.u64(e.txn);
  w.u64(e.inode);
  w.u64(e.offset);
  w.u64(e.mtime);
  w.u32(static_cast<uint32_t>(e.payload.size()));
  w.u32(e.subtree);
  w.u32(0);  // reserved
  CFS_ASSERT(out.size() == 60);
  uint32_t crc = crc32c(out.data(), 60);
  crc = crc32c(e.payload.data(), e.payload.size(), crc);
  w.u32(crc);
  w.raw(e.payload);
  w.pad_to(8);
  return out;
}

Result<LogEntry> decode_entry(const uint8_t* p, size_t avail,
                              size_t* consumed) {
  if (avail < kEntryHeaderSize) return Err::ChecksumFailure;
  ByteReader r(p, kEntryHeaderSize);
  if (r.u32() != kEntryMagic) return Err::ChecksumFailure;
  if (r.u8() != 1) return Err::ChecksumFailure;
  uint8_t kind = r.u8();
  if (kind < 1 || kind > 7) return Err::ChecksumFailure;
  LogEntry e;
  e.kind = static_cast<OpKind>(kind);
  e.flags = r.u16();
  e.seq = r.u64();
  e.txn = r.u64();
  e.inode = r.u64();
  e.offset = r.u64();
  e.mtime = r.u64();
  uint32_t plen = r.u32();
  e.subtree = r.u32();
  r.u32();  // reserved
  size_t total = entry_media_size(plen);
  if (avail < total) return Err::ChecksumFailure;
  uint32_t want = 0;
  std::memcpy(&want, p + 60, 4);
  uint32_t got = crc32c(p, 60);
  got = crc32c(p + kEntryHeaderSize, plen, got);
  if (got != want) return Err::ChecksumFailure;
  e.payload.assign(p + kEntryHeaderSize, p + kEntryHeaderSize + plen);
  if (consumed) *consumed = total;
  return e;
}

}  // namespace cfs::log
