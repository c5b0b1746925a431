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
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "iorm/clock.hpp"
#include "iorm/devices.hpp"
#include "iorm/sim/rng.hpp"
#include "iorm/tags.hpp"

namespace iorm {

enum class Pattern : std::uint8_t { PointRead, Scan, BulkWrite, Backup, Mixed };
enum class Arrival : std::uint8_t { Closed, Poisson, Periodic };

constexpr std::string_view to_string(Pattern p) noexcept {
  switch (p) {
    case Pattern::PointRead: return "point_read";
    case Pattern::Scan: return "scan";
    case Pattern::BulkWrite: return "bulk_write";
    case Pattern::Backup: return "backup";
    case Pattern::Mixed: return "mixed";
  }
  return "point_read";
}

constexpr std::string_view to_string(Arrival a) noexcept {
  switch (a) {
    case Arrival::Closed: return "closed";
    case Arrival::Poisson: return "poisson";
    case Arrival::Periodic: return "periodic";
  }
  return "closed";
}

inline std::optional<Pattern> parse_pattern(std::string_view s) {
  for (auto p : {Pattern::PointRead, Pattern::Scan, Pattern::BulkWrite, Pattern::Backup, Pattern::Mixed})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline std::optional<Arrival> parse_arrival(std::string_view s) {
  for (auto a : {Arrival::Closed, Arrival::Poisson, Arrival::Periodic})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

struct WorkloadSpec {
  std::string name;
  bool enabled = true;
  std::uint32_t database_id = 0;
  std::uint32_t workload_key = 0;
  Pattern pattern = Pattern::PointRead;
  std::optional<Priority> priority;  // default depends on the pattern
  std::optional<Category> category;
  Arrival arrival = Arrival::Closed;
  int sessions = 1;
  Duration think{0};
  double rate = 0;  // requests per second, open loop
  Duration phase{0};
  std::uint64_t size = 0;  // 0 selects the pattern default
  std::uint64_t working_set = 1024 * kMiB;
  double write_fraction = 0;  // Scan: temp spills; Mixed: data block writes
  Duration start{0};
  std::optional<Duration> stop;
  bool prewarm = false;
};

inline std::uint64_t default_size(Pattern p) noexcept {
  return p == Pattern::PointRead || p == Pattern::Mixed ? 8 * kKiB : kMiB;
}

inline Priority default_priority(Pattern p) noexcept {
  return p == Pattern::PointRead || p == Pattern::Mixed ? Priority::High : Priority::Low;
}

/// Request as produced on the database side: the tag plus the physical shape.
struct DraftIo {
  IoTag tag;
  std::uint64_t size = 0;
  Direction direction = Direction::Read;
  Locality locality = Locality::Random;
  std::uint64_t block = 0;
};

class WorkloadGenerator {
 public:
  // Each workload owns a disjoint block range: 2^30 blocks (8 TiB) per key.
  static constexpr std::uint64_t kRegionBlocks = 1ULL << 30;

  WorkloadGenerator(WorkloadSpec spec, Rng rng) : spec_(std::move(spec)), rng_(std::move(rng)) {
    if (spec_.size == 0) spec_.size = default_size(spec_.pattern);
    base_ = (static_cast<std::uint64_t>(spec_.database_id) << 40) +
            static_cast<std::uint64_t>(spec_.workload_key) * 4 * kRegionBlocks;
  }

  const WorkloadSpec& spec() const noexcept { return spec_; }
  std::uint64_t base_block() const noexcept { return base_; }
  std::uint64_t working_set_blocks() const noexcept { return std::max<std::uint64_t>(1, spec_.working_set / kBlockSize); }
  std::uint64_t size_blocks() const noexcept { return (spec_.size + kBlockSize - 1) / kBlockSize; }

  DraftIo next() {
    const auto p = spec_.pattern;
    const bool write = spec_.write_fraction > 0 && unit() < spec_.write_fraction;
    switch (p) {
      case Pattern::PointRead:
        return make(Category::BufferCacheRead, Direction::Read, Locality::Random, random_block());
      case Pattern::Mixed:
        return write ? make(Category::DatabaseWrite, Direction::Write, Locality::Random, random_block(), Priority::Low)
                     : make(Category::BufferCacheRead, Direction::Read, Locality::Random, random_block());
      case Pattern::Scan:
        if (write) return make(Category::TempWrite, Direction::Write, Locality::Sequential, next_spill(), Priority::Low);
        return make(Category::DirectPathRead, Direction::Read, Locality::Sequential, next_sequential());
      case Pattern::BulkWrite:
        return make(Category::DatabaseWrite, Direction::Write, Locality::Sequential, next_sequential());
      case Pattern::Backup:
        return make(Category::Backup, Direction::Read, Locality::Sequential, next_sequential());
    }
    return {};
  }

  /// Think time between a completion and the session's next request.
  Duration think() const noexcept { return spec_.think; }

  /// Gap to the next open-loop arrival.
  Duration interarrival() {
    if (spec_.arrival == Arrival::Periodic) return Duration{std::llround(1e6 / spec_.rate)};
    std::exponential_distribution<double> gap(spec_.rate);
    return Duration{std::max<std::int64_t>(1, std::llround(gap(rng_) * 1e6))};
  }

  /// Session start offset, spread over one think period to avoid lockstep.
  Duration stagger() {
    auto span = std::max<std::int64_t>(spec_.think.count(), 1000);
    return Duration{static_cast<std::int64_t>(uniform_below(rng_, static_cast<std::uint64_t>(span)))};
  }

  /// Blocks of the working set, for cache prewarming.
  std::uint64_t block_at(std::uint64_t i) const noexcept { return base_ + i; }

 private:
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  std::uint64_t random_block() { return base_ + uniform_below(rng_, working_set_blocks()); }

  // Sessions share one cursor, so offsets are monotone until the working set wraps.
  std::uint64_t next_sequential() {
    auto span = std::max(working_set_blocks(), size_blocks());
    if (cursor_ + size_blocks() > span) cursor_ = 0;
    auto b = base_ + cursor_;
    cursor_ += size_blocks();
    return b;
  }

  std::uint64_t next_spill() {
    auto b = base_ + 2 * kRegionBlocks + spill_ % kRegionBlocks;
    spill_ += size_blocks();
    return b;
  }

  DraftIo make(Category c, Direction d, Locality l, std::uint64_t block, std::optional<Priority> forced = {}) {
    DraftIo io;
    io.size = spec_.size;
    io.direction = d;
    io.locality = l;
    io.block = block;
    io.tag.database_id = spec_.database_id;
    io.tag.workload_key = spec_.workload_key;
    io.tag.file_number = default_file_for(spec_.category.value_or(c));
    io.tag.block_offset = block;
    io.tag.block_count = static_cast<std::uint32_t>(size_blocks());
    io.tag.priority_hint = forced ? *forced : spec_.priority.value_or(default_priority(spec_.pattern));
    return io;
  }

  WorkloadSpec spec_;
  Rng rng_;
  std::uint64_t base_ = 0;
  std::uint64_t cursor_ = 0;
  std::uint64_t spill_ = 0;
};

}  // namespace iorm
