// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "iorm/clock.hpp"
#include "iorm/error.hpp"

namespace iorm {

/// Single-threaded discrete-event queue. Events at equal times fire in the
/// order they were scheduled.
class EventQueue {
 public:
  using Action = std::function<void()>;

  SimTime now() const noexcept { return now_; }
  std::size_t pending() const noexcept { return heap_.size(); }
  std::uint64_t fired() const noexcept { return fired_; }

  void schedule(SimTime at, Action a) {
    if (at < now_) throw Error(Errc::InvariantViolation, "event scheduled in the past");
    heap_.push(Event{at, seq_++, std::move(a)});
  }

  void after(Duration d, Action a) { schedule(now_ + d, std::move(a)); }

  /// Fire events with time <= `end`; the clock finishes at `end`.
  void run_until(SimTime end) {
    while (!heap_.empty() && heap_.top().at <= end) {
      // Move out before popping; the action may schedule more events.
      Event e = std::move(const_cast<Event&>(heap_.top()));
      heap_.pop();
      now_ = e.at;
      ++fired_;
      e.action();
    }
    if (end > now_) now_ = end;
  }

 private:
  struct Event {
    SimTime at;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  SimTime now_{};
  std::uint64_t seq_ = 0;
  std::uint64_t fired_ = 0;
};

}  // namespace iorm
