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

#include <chrono>
#include <cstdint>

namespace iorm {

using Duration = std::chrono::microseconds;

/// Simulated time. Starts at zero for every run and only moves forward.
struct SimClock {
  using rep = Duration::rep;
  using period = Duration::period;
  using duration = Duration;
  using time_point = std::chrono::time_point<SimClock, Duration>;
  static constexpr bool is_steady = true;
};

using SimTime = SimClock::time_point;

constexpr SimTime sim_epoch() noexcept { return SimTime{}; }
constexpr SimTime at_us(std::int64_t us) noexcept { return SimTime{Duration{us}}; }
constexpr double to_seconds(Duration d) noexcept { return static_cast<double>(d.count()) / 1e6; }
constexpr double to_seconds(SimTime t) noexcept { return to_seconds(t.time_since_epoch()); }
constexpr Duration from_seconds(double s) noexcept { return Duration{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))}; }

}  // namespace iorm
