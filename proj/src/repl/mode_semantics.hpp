/*
 * mode_semantics.hpp
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

#include "fs/types.hpp"

namespace cfs::repl {

// Pure decision function behind the prefix oracle: the log sequence number
// through which recovery is guaranteed after a failure.
//
// Fail-over to a cache replica guarantees everything through the last
// chain-acknowledged sync: fsync when pessimistic, dsync when optimistic
// (the engine's sync ledger already tracks the mode-appropriate call). A
// process-local failure with the node surviving recovers every write whose
// log entry reached local NVM, in either mode, via dead-log eviction.
inline uint64_t guaranteed_prefix(fs::Mode mode, uint64_t last_synced_seq,
                                  bool node_survived,
                                  uint64_t appended_through) {
  (void)mode;
  if (node_survived) return appended_through;
  return last_synced_seq;
}

}  // namespace cfs::repl
