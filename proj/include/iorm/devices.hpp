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

// Synthetic device models. A device has a number of service channels (1 for a
// spindle, several for flash), a service-time distribution per I/O shape, and
// a cost-weighted in-flight budget that gates how much the scheduler may keep
// outstanding on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "iorm/clock.hpp"
#include "iorm/error.hpp"
#include "iorm/tags.hpp"

namespace iorm {

enum class DeviceKind : std::uint8_t { Hdd, Flash };
enum class Direction : std::uint8_t { Read, Write };
enum class Locality : std::uint8_t { Random, Sequential };
enum class SizeClass : std::uint8_t { Small, Large };

constexpr std::string_view to_string(DeviceKind k) noexcept { return k == DeviceKind::Hdd ? "hdd" : "flash"; }
constexpr std::string_view to_string(Direction d) noexcept { return d == Direction::Read ? "read" : "write"; }

inline constexpr std::uint64_t kKiB = 1024;
inline constexpr std::uint64_t kMiB = 1024 * kKiB;

/// Largest size still counted as small. Inclusive, so 128 KiB fragments are
/// small by construction.
inline constexpr std::uint64_t kSmallIoMax = 128 * kKiB;

constexpr SizeClass size_class(std::uint64_t bytes) noexcept {
  return bytes <= kSmallIoMax ? SizeClass::Small : SizeClass::Large;
}

struct IoShape {
  std::uint64_t size = 8 * kKiB;
  Direction direction = Direction::Read;
  Locality locality = Locality::Random;
};

struct HddServiceParams {
  double random_mean_us = 6000.0;  // positioning (seek + rotation), lognormal
  double random_p99_us = 15000.0;
  double sequential_position_us = 2000.0;
  double bytes_per_us = static_cast<double>(kMiB) / 5000.0;  // 1 MiB per 5 ms
  double cached_write_us = 200.0;
};

struct FlashServiceParams {
  double min_us = 80.0;  // 8 KiB access, uniform
  double max_us = 200.0;
  std::uint64_t base_size = 8 * kKiB;
  double bytes_per_us = 2000.0;  // 2 GB/s beyond base_size
};

/// Lognormal (mu, sigma) with the given mean and 99th percentile.
struct LognormalParams {
  double mu = 0;
  double sigma = 0;
};

inline LognormalParams lognormal_from_mean_p99(double mean, double p99) {
  constexpr double z99 = 2.3263478740408408;
  if (!(mean > 0) || !(p99 > mean)) throw Error(Errc::InvalidDirective, "lognormal needs 0 < mean < p99");
  // ln(p99/mean) = z*s - s^2/2; take the smaller root.
  const double disc = z99 * z99 - 2.0 * std::log(p99 / mean);
  if (disc < 0) throw Error(Errc::InvalidDirective, "p99/mean ratio too large for a lognormal");
  const double s = z99 - std::sqrt(disc);
  return {std::log(mean) - s * s / 2.0, s};
}

class WriteCacheState {
 public:
  WriteCacheState() = default;
  WriteCacheState(std::uint64_t capacity, double flush_bytes_per_s, double pressure_threshold)
      : capacity_(capacity), flush_rate_(flush_bytes_per_s), threshold_(pressure_threshold) {}

  std::uint64_t capacity() const noexcept { return capacity_; }
  double fill() const noexcept { return fill_; }
  double flush_rate() const noexcept { return flush_rate_; }
  double pressure_threshold() const noexcept { return threshold_; }
  bool pressure() const noexcept { return capacity_ > 0 && fill_ / static_cast<double>(capacity_) > threshold_; }

  /// Stage a write. Returns false when it does not fit and must go to the platter.
  bool absorb(std::uint64_t bytes) noexcept {
    if (fill_ + static_cast<double>(bytes) > static_cast<double>(capacity_)) return false;
    fill_ += static_cast<double>(bytes);
    return true;
  }

  /// Drain for `elapsed` and report pressure.
  bool tick(Duration elapsed) noexcept {
    if (elapsed.count() > 0) fill_ = std::max(0.0, fill_ - flush_rate_ * to_seconds(elapsed));
    return pressure();
  }

 private:
  std::uint64_t capacity_ = 0;
  double fill_ = 0;
  double flush_rate_ = 0;
  double threshold_ = 0.8;
};

struct DeviceModel {
  DeviceKind kind = DeviceKind::Hdd;
  unsigned channels = 1;
  double rated_capacity = 1.0;  // normalized cost units per second
  HddServiceParams hdd;
  FlashServiceParams flash;
  std::optional<WriteCacheState> write_cache;
};

inline DeviceModel hdd_model() {
  DeviceModel m;
  m.kind = DeviceKind::Hdd;
  m.channels = 1;
  m.rated_capacity = 1.0;
  m.write_cache = WriteCacheState(64 * kMiB, 100.0 * kMiB, 0.8);
  return m;
}

inline DeviceModel flash_model(unsigned channels = 8) {
  DeviceModel m;
  m.kind = DeviceKind::Flash;
  m.channels = channels;
  m.rated_capacity = static_cast<double>(channels);
  return m;
}

struct ServiceSample {
  Duration time{1};
  bool occupies_channel = true;  // false for writes absorbed by the write cache
};

namespace detail {
inline Duration to_duration(double us) { return Duration{std::max<std::int64_t>(1, std::llround(us))}; }
}  // namespace detail

/// Platter or flash-array service time for one I/O. `cached` selects the
/// write-cache path for HDD writes; the caller decides whether it fits.
template <typename G>
ServiceSample sample_service_time(const DeviceModel& m, const IoShape& io, G& rng, bool cached = false) {
  if (io.size == 0) throw Error(Errc::InvalidDirective, "zero-size I/O");
  const double bytes = static_cast<double>(io.size);
  if (m.kind == DeviceKind::Flash) {
    std::uniform_real_distribution<double> access(m.flash.min_us, m.flash.max_us);
    double extra = io.size > m.flash.base_size ? static_cast<double>(io.size - m.flash.base_size) / m.flash.bytes_per_us : 0.0;
    return {detail::to_duration(access(rng) + extra), true};
  }
  if (io.direction == Direction::Write && cached) return {detail::to_duration(m.hdd.cached_write_us), false};
  const double transfer = bytes / m.hdd.bytes_per_us;
  if (io.locality == Locality::Sequential) return {detail::to_duration(m.hdd.sequential_position_us + transfer), true};
  auto p = lognormal_from_mean_p99(m.hdd.random_mean_us, m.hdd.random_p99_us);
  std::lognormal_distribution<double> position(p.mu, p.sigma);
  return {detail::to_duration(position(rng) + transfer), true};
}

/// Closed-form mean service time in microseconds (before rounding).
inline double mean_service_us(const DeviceModel& m, const IoShape& io) {
  const double bytes = static_cast<double>(io.size);
  if (m.kind == DeviceKind::Flash) {
    double extra = io.size > m.flash.base_size ? static_cast<double>(io.size - m.flash.base_size) / m.flash.bytes_per_us : 0.0;
    return (m.flash.min_us + m.flash.max_us) / 2.0 + extra;
  }
  const double transfer = bytes / m.hdd.bytes_per_us;
  if (io.locality == Locality::Sequential) return m.hdd.sequential_position_us + transfer;
  return m.hdd.random_mean_us + transfer;
}

struct DeviceQueueTargets {
  int read_target = 62;
  int normal_read_target = 62;
  int degraded_read_target = 32;
  int small_read_floor = 32;
  int large_read_cap = 10;
  int large_cost = 3;
  int write_target = 8;
  int flash_lowprio_target = 8;
  int raw_queue_limit = 64;  // used by the bypass dispatcher and solo mode
};

inline DeviceQueueTargets default_targets(DeviceKind kind) {
  DeviceQueueTargets t;
  if (kind == DeviceKind::Flash) t.raw_queue_limit = 256;
  return t;
}

/// Cache availability changes the HDD read budget; flash targets are unaffected.
inline DeviceQueueTargets set_degraded_mode(DeviceQueueTargets t, bool cache_available) {
  t.read_target = cache_available ? t.normal_read_target : t.degraded_read_target;
  return t;
}

struct IoClass {
  Direction direction = Direction::Read;
  SizeClass size = SizeClass::Small;
  Priority priority = Priority::Medium;

  friend bool operator==(const IoClass&, const IoClass&) = default;
};

inline IoClass io_class(const IoShape& io, Priority p) { return {io.direction, size_class(io.size), p}; }

/// Admitted, not yet completed I/O on one device.
class InFlightState {
 public:
  struct Entry {
    IoClass cls;
    int cost = 0;
    std::string entity;
  };

  int total_cost() const noexcept { return total_cost_; }
  int small_count() const noexcept { return small_; }
  int large_count() const noexcept { return large_; }
  int write_count() const noexcept { return writes_; }
  int low_count() const noexcept { return low_; }  // non-High outstanding, any direction
  int low_write_count() const noexcept { return low_writes_; }
  int outstanding() const noexcept { return static_cast<int>(entries_.size()); }
  bool contains(std::uint64_t id) const { return entries_.count(id) != 0; }
  const std::map<std::string, Duration>& busy_time() const noexcept { return busy_; }

  /// Class rule only, without side effects.
  bool admissible(DeviceKind kind, const DeviceQueueTargets& t, const IoClass& c) const noexcept {
    if (kind == DeviceKind::Flash) return c.priority == Priority::High || low_ < t.flash_lowprio_target;
    if (c.direction == Direction::Write) return writes_ < t.write_target;
    if (c.size == SizeClass::Small) return total_cost_ + 1 <= t.read_target || small_ < t.small_read_floor;
    return large_ < t.large_read_cap && total_cost_ + t.large_cost <= t.read_target;
  }

  /// Admit `id` if the class rule passes; counters update with the decision.
  bool try_admit(std::uint64_t id, DeviceKind kind, const DeviceQueueTargets& t, const IoClass& c,
                 std::string_view entity = {}) {
    if (!admissible(kind, t, c)) return false;
    force_admit(id, c, t, entity);
    return true;
  }

  /// Record an admission without checking class rules (bypass dispatcher).
  void force_admit(std::uint64_t id, const IoClass& c, const DeviceQueueTargets& t, std::string_view entity = {}) {
    if (entries_.count(id)) throw Error(Errc::InvariantViolation, "request " + std::to_string(id) + " admitted twice");
    Entry e{c, 0, std::string(entity)};
    if (c.direction == Direction::Write) {
      ++writes_;
      if (c.priority != Priority::High) ++low_writes_;
    } else if (c.size == SizeClass::Small) {
      ++small_;
      e.cost = 1;
    } else {
      ++large_;
      e.cost = t.large_cost;
    }
    if (c.priority != Priority::High) ++low_;
    total_cost_ += e.cost;
    entries_.emplace(id, std::move(e));
  }

  /// Release an admitted request. Throws DoubleCompletion if `id` is not in flight.
  Entry complete(std::uint64_t id, Duration service_time = Duration{0}) {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(Errc::DoubleCompletion, "request " + std::to_string(id) + " is not in flight");
    Entry e = std::move(it->second);
    entries_.erase(it);
    if (e.cls.direction == Direction::Write) {
      --writes_;
      if (e.cls.priority != Priority::High) --low_writes_;
    } else if (e.cls.size == SizeClass::Small) {
      --small_;
    } else {
      --large_;
    }
    if (e.cls.priority != Priority::High) --low_;
    total_cost_ -= e.cost;
    if (service_time.count() > 0) busy_[e.entity] += service_time;
    return e;
  }

 private:
  std::map<std::uint64_t, Entry> entries_;
  std::map<std::string, Duration> busy_;
  int total_cost_ = 0;
  int small_ = 0;
  int large_ = 0;
  int writes_ = 0;
  int low_ = 0;
  int low_writes_ = 0;
};

/// Admitted requests waiting for a free service channel, in admission order.
class ChannelPool {
 public:
  explicit ChannelPool(unsigned channels = 1) : channels_(channels) {}

  unsigned channels() const noexcept { return channels_; }
  unsigned busy() const noexcept { return busy_; }
  std::size_t waiting() const noexcept { return waiting_.size(); }

  /// Returns true if the request can start now; otherwise it is queued.
  bool arrive(std::uint64_t id) {
    if (busy_ < channels_) {
      ++busy_;
      return true;
    }
    waiting_.push_back(id);
    return false;
  }

  /// Free a channel; returns the next waiting request, which now holds it.
  std::optional<std::uint64_t> release() {
    if (busy_ == 0) throw Error(Errc::InvariantViolation, "channel released while idle");
    if (waiting_.empty()) {
      --busy_;
      return std::nullopt;
    }
    auto id = waiting_.front();
    waiting_.pop_front();
    return id;
  }

 private:
  unsigned channels_;
  unsigned busy_ = 0;
  std::deque<std::uint64_t> waiting_;
};

}  // namespace iorm
