/*
 * kvconfig.hpp
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
#include <map>
#include <string>
#include <vector>

#include "util/result.hpp"

namespace cfs {

// Line based configuration format shared by cluster configs and scenario
// files:
//
//   # comment
//   version = 1
//   [node n1]
//   sockets = 1
//   [chain /shard0]
//   replicas = n1, n2
//
// Section headers are `[kind arg]`; the same kind may repeat. Keys before
// the first header belong to the root section.
struct KvSection {
  std::string kind;
  std::string arg;
  std::map<std::string, std::string> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  std::string get(const std::string& key, const std::string& dflt = "") const;
  uint64_t get_u64(const std::string& key, uint64_t dflt) const;
  double get_f64(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  // Size values accept k/kb, m/mb, g/gb suffixes (powers of two).
  uint64_t get_size(const std::string& key, uint64_t dflt) const;
  // Time values accept ns/us/ms/s suffixes and return nanoseconds.
  uint64_t get_time_ns(const std::string& key, uint64_t dflt) const;
  std::vector<std::string> get_list(const std::string& key) const;
};

struct KvFile {
  KvSection root;
  std::vector<KvSection> sections;

  std::vector<const KvSection*> all(const std::string& kind) const;
  const KvSection* first(const std::string& kind) const;
  const KvSection* find(const std::string& kind, const std::string& arg) const;
};

Result<KvFile> parse_kv_text(const std::string& text);
Result<KvFile> parse_kv_file(const std::string& path);

uint64_t parse_size_value(const std::string& s, uint64_t dflt);
uint64_t parse_time_ns_value(const std::string& s, uint64_t dflt);

}  // namespace cfs
