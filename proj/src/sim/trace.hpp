/*
 * trace.hpp
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
#include <sstream>
#include <string>
#include <vector>

#include "sim/event_loop.hpp"
#include "util/hash.hpp"

namespace cfs::sim {

// One line per delivered message: time, kind, src, dst, size, tag.
// Tab separated; this format is consumed by the CLI trace inspector.
class TraceRecorder {
 public:
  void record(Time t, const std::string& kind, const std::string& src,
              const std::string& dst, uint64_t size, const std::string& tag) {
    std::ostringstream line;
    line << t << '\t' << kind << '\t' << src << '\t' << dst << '\t' << size
         << '\t' << tag;
    lines_.push_back(line.str());
  }

  const std::vector<std::string>& lines() const { return lines_; }

  std::string text() const {
    std::string out;
    for (const auto& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }

  uint64_t hash() const {
    Hasher h;
    for (const auto& l : lines_) h.str(l);
    return h.digest();
  }

  size_t count() const { return lines_.size(); }

 private:
  std::vector<std::string> lines_;
};

}  // namespace cfs::sim
