/*
 * hash.hpp
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

namespace cfs {

// Incremental FNV-1a/64. Used for state hashes and trace hashes; these are
// comparison fingerprints, not cryptographic digests.
class Hasher {
 public:
  Hasher& u8(uint8_t v) {
    h_ = (h_ ^ v) * kPrime;
    return *this;
  }
  Hasher& u64(uint64_t v) {
    for (int i = 0; i < 8; i++) u8(static_cast<uint8_t>(v >> (8 * i)));
    return *this;
  }
  Hasher& i64(int64_t v) { return u64(static_cast<uint64_t>(v)); }
  Hasher& bytes(const uint8_t* p, size_t n) {
    for (size_t i = 0; i < n; i++) u8(p[i]);
    return *this;
  }
  Hasher& bytes(const std::vector<uint8_t>& b) { return bytes(b.data(), b.size()); }
  Hasher& str(const std::string& s) {
    u64(s.size());
    return bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  uint64_t digest() const { return h_; }

 private:
  static constexpr uint64_t kPrime = 0x100000001B3ull;
  uint64_t h_ = 0xCBF29CE484222325ull;
};

inline uint64_t hash_str(const std::string& s) {
  return Hasher{}.str(s).digest();
}

}  // namespace cfs
