/*
 * coro.hpp
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

#include <coroutine>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "sim/event_loop.hpp"
#include "util/assert.hpp"

namespace cfs::sim {

// Future with shared state, fulfilled exactly once. Single suspended waiter
// plus any number of callback consumers. Everything runs on the event loop
// thread; fulfilling resumes the waiter inline.
template <class T>
class Future {
  struct State {
    std::optional<T> value;
    std::vector<std::coroutine_handle<>> waiters;
    std::vector<std::function<void(const T&)>> callbacks;
  };

 public:
  Future() : st_(std::make_shared<State>()) {}

  bool ready() const { return st_->value.has_value(); }
  const T& peek() const {
    CFS_ASSERT(ready());
    return *st_->value;
  }

  bool try_fulfill(T v) const {
    if (st_->value.has_value()) return false;
    st_->value = std::move(v);
    auto cbs = std::move(st_->callbacks);
    st_->callbacks.clear();
    for (auto& cb : cbs) cb(*st_->value);
    auto waiters = std::move(st_->waiters);
    st_->waiters.clear();
    for (auto& w : waiters) w.resume();
    return true;
  }

  void fulfill(T v) const { CFS_ASSERT(try_fulfill(std::move(v))); }

  void on_ready(std::function<void(const T&)> cb) const {
    if (st_->value.has_value()) {
      cb(*st_->value);
    } else {
      st_->callbacks.push_back(std::move(cb));
    }
  }

  // Awaitable interface. The awaiter is a by-value copy: gcc 11 mishandles
  // class-typed await_resume results when the awaiter is an lvalue.
  struct Awaiter {
    std::shared_ptr<State> st;
    bool await_ready() const { return st->value.has_value(); }
    void await_suspend(std::coroutine_handle<> h) const {
      st->waiters.push_back(h);
    }
    T await_resume() const { return *st->value; }
  };
  Awaiter operator co_await() const { return Awaiter{st_}; }

 private:
  std::shared_ptr<State> st_;
};

// Detached coroutine used by actors and workload scripts. Starts eagerly,
// destroys its own frame on completion. Protocol code reports failures as
// values, so an escaping exception is a bug.
struct Task {
  struct promise_type {
    Task get_return_object() { return {}; }
    std::suspend_never initial_suspend() noexcept { return {}; }
    std::suspend_never final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { std::terminate(); }
  };
};

// Eagerly started coroutine whose result is observable as a Future<T>.
// `co_await some_co` awaits that future; the frame frees itself once the
// body returns.
template <class T>
struct Co {
  struct promise_type {
    Future<T> fut;
    Co get_return_object() { return Co{fut}; }
    std::suspend_never initial_suspend() noexcept { return {}; }
    std::suspend_never final_suspend() noexcept { return {}; }
    void return_value(T v) { fut.fulfill(std::move(v)); }
    void unhandled_exception() { std::terminate(); }
  };

  Future<T> fut;

  typename Future<T>::Awaiter operator co_await() const {
    return fut.operator co_await();
  }
};

// FIFO mutex for actor-internal critical sections that span awaits.
class AsyncMutex {
 public:
  struct Guard {
    AsyncMutex* m;
    ~Guard() {
      if (m) m->unlock();
    }
    Guard(AsyncMutex* mm) : m(mm) {}
    Guard(Guard&& o) : m(o.m) { o.m = nullptr; }
    Guard(const Guard&) = delete;
  };

  struct Awaiter {
    AsyncMutex& m;
    bool await_ready() const { return !m.held_; }
    void await_suspend(std::coroutine_handle<> h) { m.waiters_.push_back(h); }
    Guard await_resume() {
      m.held_ = true;
      return Guard{&m};
    }
  };

  Awaiter lock() { return Awaiter{*this}; }
  bool locked() const { return held_; }

 private:
  void unlock() {
    CFS_ASSERT(held_);
    if (!waiters_.empty()) {
      auto h = waiters_.front();
      waiters_.erase(waiters_.begin());
      // held_ stays true for the successor.
      h.resume();
    } else {
      held_ = false;
    }
  }

  bool held_ = false;
  std::vector<std::coroutine_handle<>> waiters_;
};

// co_await sleep_until(loop, t)
struct SleepAwaiter {
  EventLoop& loop;
  Time at;
  bool await_ready() const { return loop.now() >= at; }
  void await_suspend(std::coroutine_handle<> h) const {
    loop.schedule_at(at, [h] { h.resume(); });
  }
  void await_resume() const {}
};

inline SleepAwaiter sleep_until(EventLoop& loop, Time t) {
  return SleepAwaiter{loop, t < loop.now() ? loop.now() : t};
}

inline SleepAwaiter sleep_for(EventLoop& loop, Time dt) {
  return SleepAwaiter{loop, loop.now() + dt};
}

}  // namespace cfs::sim
