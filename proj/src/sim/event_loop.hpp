/*
 * event_loop.hpp
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
#include <functional>
#include <queue>
#include <vector>

#include "util/assert.hpp"

namespace cfs::sim {

// Simulated time in nanoseconds.
using Time = uint64_t;

constexpr Time kUsec = 1000;
constexpr Time kMsec = 1000 * kUsec;
constexpr Time kSec = 1000 * kMsec;

// Single threaded discrete event loop. Events at the same instant run in
// scheduling order; there is no other tie-breaking, which is what makes
// runs bit-reproducible.
class EventLoop {
 public:
  Time now() const { return now_; }

  // `periodic` marks self-rescheduling background work (heartbeats, manager
  // migration ticks). Quiescence is reached when only periodic events remain.
  void schedule_at(Time t, std::function<void()> fn, bool periodic = false) {
    CFS_ASSERT(t >= now_);
    queue_.push(Ev{t, next_seq_++, periodic, std::move(fn)});
    if (!periodic) pending_work_++;
  }
  void schedule_in(Time dt, std::function<void()> fn, bool periodic = false) {
    schedule_at(now_ + dt, std::move(fn), periodic);
  }

  bool empty() const { return queue_.empty(); }
  size_t pending_work() const { return pending_work_; }
  uint64_t steps_run() const { return steps_; }

  // Runs one event. Returns false when the queue is empty.
  bool step() {
    if (queue_.empty()) return false;
    Ev ev = queue_.top();
    queue_.pop();
    CFS_ASSERT(ev.t >= now_);
    now_ = ev.t;
    if (!ev.periodic) pending_work_--;
    steps_++;
    CFS_ASSERT_MSG(steps_ < kStepCap, "event loop runaway (livelock?)");
    ev.fn();
    return true;
  }

  // Runs until no non-periodic work remains or simulated time passes `cap`.
  void run_until_quiesce(Time cap) {
    while (pending_work_ > 0 && !queue_.empty() && queue_.top().t <= cap) {
      step();
    }
  }

  // Runs every event scheduled at or before `t`, then advances the clock.
  void run_until(Time t) {
    while (!queue_.empty() && queue_.top().t <= t) step();
    if (now_ < t) now_ = t;
  }

  void run_while(const std::function<bool()>& keep_going, Time cap) {
    while (keep_going() && !queue_.empty() && queue_.top().t <= cap) step();
  }

 private:
  struct Ev {
    Time t;
    uint64_t seq;
    bool periodic;
    std::function<void()> fn;
    bool operator>(const Ev& o) const {
      if (t != o.t) return t > o.t;
      return seq > o.seq;
    }
  };

  static constexpr uint64_t kStepCap = 400'000'000;

  std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> queue_;
  Time now_ = 0;
  uint64_t next_seq_ = 0;
  size_t pending_work_ = 0;
  uint64_t steps_ = 0;
};

}  // namespace cfs::sim
