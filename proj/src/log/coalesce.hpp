/*
 * coalesce.hpp
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

#include "log/entry.hpp"

namespace cfs::log {

// Removes superseded work from an entry sequence before replication:
//  - bytes of a WRITE overwritten by later WRITEs (or cut off by a later
//    TRUNCATE) are dropped, splitting partially-shadowed writes;
//  - a SETATTR followed by a later SETATTR to the same inode is dropped;
//  - an inode created and unlinked within the range disappears entirely,
//    along with every entry that only touched it (no RENAME involvement).
//
// Applying the result in order to any state yields the same state as
// applying the input. Ordering of surviving entries is preserved.
std::vector<LogEntry> coalesce(const std::vector<LogEntry>& entries);

}  // namespace cfs::log
