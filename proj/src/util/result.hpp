/*
 * result.hpp
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

#include <optional>
#include <string_view>
#include <utility>

#include "util/assert.hpp"

namespace cfs {

// One error enumeration across the simulator. POSIX-visible codes come
// first and keep their familiar names; protocol and media errors follow.
enum class Err {
  Ok = 0,

  // POSIX surface
  ENOENT_,
  EEXIST_,
  EACCES_,
  ENOSPC_,
  ENOTDIR_,
  EISDIR_,
  EINVAL_,
  ENOTEMPTY_,
  EBADF_,
  EXDEV_,

  // Lease protocol
  LeaseTimeout,
  NotManager,

  // Media
  UnknownRegion,
  CapacityExceeded,
  OutOfRange,
  Misaligned,

  // Network
  UnregisteredRegion,
  DstFailed,
  Timeout,

  // Log / digest / replication
  ChecksumFailure,
  PermissionDenied,
  LogFull,
  ReplicaOutOfMemory,
  ReplicaFailed,
  ChainUnavailable,

  // Harness
  ScenarioInvalid,
  SearchBoundExceeded,
  ParseError,
};

constexpr std::string_view err_name(Err e) {
  switch (e) {
    case Err::Ok: return "OK";
    case Err::ENOENT_: return "ENOENT";
    case Err::EEXIST_: return "EEXIST";
    case Err::EACCES_: return "EACCES";
    case Err::ENOSPC_: return "ENOSPC";
    case Err::ENOTDIR_: return "ENOTDIR";
    case Err::EISDIR_: return "EISDIR";
    case Err::EINVAL_: return "EINVAL";
    case Err::ENOTEMPTY_: return "ENOTEMPTY";
    case Err::EBADF_: return "EBADF";
    case Err::EXDEV_: return "EXDEV";
    case Err::LeaseTimeout: return "lease-timeout";
    case Err::NotManager: return "not-manager";
    case Err::UnknownRegion: return "unknown-region";
    case Err::CapacityExceeded: return "capacity-exceeded";
    case Err::OutOfRange: return "out-of-range";
    case Err::Misaligned: return "misaligned";
    case Err::UnregisteredRegion: return "unregistered-region";
    case Err::DstFailed: return "dst-failed";
    case Err::Timeout: return "timeout";
    case Err::ChecksumFailure: return "checksum-failure";
    case Err::PermissionDenied: return "permission-denied";
    case Err::LogFull: return "log-full";
    case Err::ReplicaOutOfMemory: return "replica-out-of-memory";
    case Err::ReplicaFailed: return "replica-failed";
    case Err::ChainUnavailable: return "chain-unavailable";
    case Err::ScenarioInvalid: return "scenario-invalid";
    case Err::SearchBoundExceeded: return "search-bound-exceeded";
    case Err::ParseError: return "parse-error";
  }
  return "unknown";
}

// Minimal expected-style carrier. Values are small and copied freely;
// the simulator is single threaded so no synchronization is needed.
template <class T>
class Result {
 public:
  Result(T v) : val_(std::move(v)), err_(Err::Ok) {}  // NOLINT(implicit)
  Result(Err e) : err_(e) { CFS_ASSERT(e != Err::Ok); }  // NOLINT(implicit)

  bool ok() const { return err_ == Err::Ok; }
  explicit operator bool() const { return ok(); }
  Err error() const { return err_; }

  T& value() {
    CFS_ASSERT_MSG(ok(), "Result::value() on error %d", static_cast<int>(err_));
    return *val_;
  }
  const T& value() const {
    CFS_ASSERT_MSG(ok(), "Result::value() on error %d", static_cast<int>(err_));
    return *val_;
  }
  T& operator*() { return value(); }
  const T& operator*() const { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

  T value_or(T alt) const { return ok() ? *val_ : std::move(alt); }

 private:
  std::optional<T> val_;
  Err err_;
};

// Unit result for operations with no payload.
struct Unit {
  uint8_t dummy = 0;  // non-empty: empty classes trip gcc 11 coroutine frames
};

template <>
class Result<void> {
 public:
  Result() : err_(Err::Ok) {}
  Result(Err e) : err_(e) {}  // NOLINT(implicit)
  bool ok() const { return err_ == Err::Ok; }
  explicit operator bool() const { return ok(); }
  Err error() const { return err_; }

 private:
  Err err_;
};

using Status = Result<void>;

}  // namespace cfs
