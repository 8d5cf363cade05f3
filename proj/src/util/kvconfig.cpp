/*
 * kvconfig.cpp
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

#include "util/kvconfig.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cfs {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) a++;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) b--;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string KvSection::get(const std::string& key, const std::string& dflt) const {
  auto it = entries.find(key);
  return it == entries.end() ? dflt : it->second;
}

uint64_t KvSection::get_u64(const std::string& key, uint64_t dflt) const {
  auto it = entries.find(key);
  if (it == entries.end()) return dflt;
  return std::strtoull(it->second.c_str(), nullptr, 0);
}

double KvSection::get_f64(const std::string& key, double dflt) const {
  auto it = entries.find(key);
  if (it == entries.end()) return dflt;
  return std::strtod(it->second.c_str(), nullptr);
}

bool KvSection::get_bool(const std::string& key, bool dflt) const {
  auto it = entries.find(key);
  if (it == entries.end()) return dflt;
  std::string v = lower(trim(it->second));
  return v == "1" || v == "true" || v == "yes" || v == "on";
}

uint64_t parse_size_value(const std::string& raw, uint64_t dflt) {
  std::string s = lower(trim(raw));
  if (s.empty()) return dflt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  std::string suffix = trim(std::string(end));
  uint64_t mul = 1;
  if (suffix == "k" || suffix == "kb") mul = 1ull << 10;
  else if (suffix == "m" || suffix == "mb") mul = 1ull << 20;
  else if (suffix == "g" || suffix == "gb") mul = 1ull << 30;
  else if (!suffix.empty() && suffix != "b") return dflt;
  return static_cast<uint64_t>(v * static_cast<double>(mul));
}

uint64_t parse_time_ns_value(const std::string& raw, uint64_t dflt) {
  std::string s = lower(trim(raw));
  if (s.empty()) return dflt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  std::string suffix = trim(std::string(end));
  double mul = 1.0;
  if (suffix == "ns" || suffix.empty()) mul = 1.0;
  else if (suffix == "us") mul = 1e3;
  else if (suffix == "ms") mul = 1e6;
  else if (suffix == "s") mul = 1e9;
  else return dflt;
  return static_cast<uint64_t>(v * mul);
}

uint64_t KvSection::get_size(const std::string& key, uint64_t dflt) const {
  auto it = entries.find(key);
  if (it == entries.end()) return dflt;
  return parse_size_value(it->second, dflt);
}

uint64_t KvSection::get_time_ns(const std::string& key, uint64_t dflt) const {
  auto it = entries.find(key);
  if (it == entries.end()) return dflt;
  return parse_time_ns_value(it->second, dflt);
}

std::vector<std::string> KvSection::get_list(const std::string& key) const {
  std::vector<std::string> out;
  auto it = entries.find(key);
  if (it == entries.end()) return out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<const KvSection*> KvFile::all(const std::string& kind) const {
  std::vector<const KvSection*> out;
  for (const auto& s : sections)
    if (s.kind == kind) out.push_back(&s);
  return out;
}

const KvSection* KvFile::first(const std::string& kind) const {
  for (const auto& s : sections)
    if (s.kind == kind) return &s;
  return nullptr;
}

const KvSection* KvFile::find(const std::string& kind,
                              const std::string& arg) const {
  for (const auto& s : sections)
    if (s.kind == kind && s.arg == arg) return &s;
  return nullptr;
}

Result<KvFile> parse_kv_text(const std::string& text) {
  KvFile file;
  KvSection* cur = &file.root;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') return Err::ParseError;
      std::string inner = trim(t.substr(1, t.size() - 2));
      if (inner.empty()) return Err::ParseError;
      KvSection sec;
      size_t sp = inner.find_first_of(" \t");
      if (sp == std::string::npos) {
        sec.kind = inner;
      } else {
        sec.kind = inner.substr(0, sp);
        sec.arg = trim(inner.substr(sp + 1));
      }
      file.sections.push_back(sec);
      cur = &file.sections.back();
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos) return Err::ParseError;
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty()) return Err::ParseError;
    cur->entries[key] = val;
  }
  return file;
}

Result<KvFile> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Err::ParseError;
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

}  // namespace cfs
