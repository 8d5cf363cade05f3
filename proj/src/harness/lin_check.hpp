/*
 * lin_check.hpp
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

#include <vector>

#include "fs/ref_fs.hpp"
#include "harness/history.hpp"

namespace cfs::harness {

struct LinResult {
  bool linearizable = false;
  bool bound_exceeded = false;
  uint64_t states_explored = 0;
  // On rejection: the smallest history prefix (in response order) that
  // already has no valid linearization.
  std::vector<HistoryOp> witness;
};

// Exhaustive linearizability check of a completed history against the
// sequential POSIX-subset specification. Ops may be linearized in any
// order that respects real time (o1 before o2 when o1.response <
// o2.invoke); each candidate order replays against RefFs and must
// reproduce every recorded result.
class LinChecker {
 public:
  explicit LinChecker(std::vector<std::string> root_dirs,
                      uint64_t state_bound = 2'000'000)
      : roots_(std::move(root_dirs)), bound_(state_bound) {}

  LinResult check(const std::vector<HistoryOp>& ops,
                  const std::map<std::string, fs::Cred>& creds) const;

  // Applies one op to the sequential spec; true when the recorded result
  // matches the specification's.
  static bool apply_matches(fs::RefFs& ref, const HistoryOp& op,
                            const fs::Cred& cred);

 private:
  bool search(const std::vector<HistoryOp>& ops,
              const std::map<std::string, fs::Cred>& creds,
              uint64_t* states) const;

  std::vector<std::string> roots_;
  uint64_t bound_;
};

}  // namespace cfs::harness
