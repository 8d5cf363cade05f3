/*
 * bytes.hpp
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
#include <cstring>
#include <string>
#include <vector>

#include "util/assert.hpp"

namespace cfs {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(const std::string& s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

// Little-endian scalar codec used by every durable layout in the repo.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) { put(&v, 2); }
  void u32(uint32_t v) { put(&v, 4); }
  void u64(uint64_t v) { put(&v, 8); }
  void raw(const uint8_t* p, size_t n) { out_.insert(out_.end(), p, p + n); }
  void raw(const Bytes& b) { raw(b.data(), b.size()); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  void pad_to(size_t boundary) {
    while (out_.size() % boundary != 0) out_.push_back(0);
  }
  size_t size() const { return out_.size(); }

 private:
  void put(const void* p, size_t n) {
    // Host is little-endian on every platform this builds for; keep the
    // memcpy so the layout stays explicit.
    const uint8_t* b = static_cast<const uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  Bytes& out_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
  explicit ByteReader(const Bytes& b) : p_(b.data()), n_(b.size()) {}

  bool ok() const { return ok_; }
  size_t remaining() const { return n_ - off_; }
  size_t offset() const { return off_; }

  uint8_t u8() { uint8_t v = 0; get(&v, 1); return v; }
  uint16_t u16() { uint16_t v = 0; get(&v, 2); return v; }
  uint32_t u32() { uint32_t v = 0; get(&v, 4); return v; }
  uint64_t u64() { uint64_t v = 0; get(&v, 8); return v; }
  Bytes raw(size_t n) {
    if (off_ + n > n_) { ok_ = false; return {}; }
    Bytes b(p_ + off_, p_ + off_ + n);
    off_ += n;
    return b;
  }
  std::string str() {
    uint32_t n = u32();
    if (!ok_ || off_ + n > n_) { ok_ = false; return {}; }
    std::string s(reinterpret_cast<const char*>(p_ + off_), n);
    off_ += n;
    return s;
  }
  void skip(size_t n) {
    if (off_ + n > n_) { ok_ = false; return; }
    off_ += n;
  }

 private:
  void get(void* v, size_t n) {
    if (off_ + n > n_) { ok_ = false; return; }
    std::memcpy(v, p_ + off_, n);
    off_ += n;
  }
  const uint8_t* p_;
  size_t n_;
  size_t off_ = 0;
  bool ok_ = true;
};

}  // namespace cfs
