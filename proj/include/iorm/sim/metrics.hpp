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

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iorm/accounting.hpp"
#include "iorm/clock.hpp"

namespace iorm {

/// Latency buckets: <512us, <1ms, <2ms, <4ms, <8ms, <16ms, <32ms, >=32ms.
inline constexpr std::array<std::int64_t, 7> kHistogramEdgesUs = {512, 1000, 2000, 4000, 8000, 16000, 32000};
inline constexpr std::array<std::string_view, 8> kHistogramLabels = {"<512us", "<1ms",  "<2ms",  "<4ms",
                                                                     "<8ms",   "<16ms", "<32ms", ">=32ms"};

struct LatencyHistogram {
  std::array<std::uint64_t, 8> counts{};

  static std::size_t bucket(Duration d) noexcept {
    std::size_t b = 0;
    while (b < kHistogramEdgesUs.size() && d.count() >= kHistogramEdgesUs[b]) ++b;
    return b;
  }

  void add(Duration d) noexcept { ++counts[bucket(d)]; }

  std::uint64_t total() const noexcept {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }

  double fraction(std::size_t b) const noexcept {
    auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(counts.at(b)) / static_cast<double>(n);
  }

  /// Fraction of samples below the edge with index `edge` (e.g. 3 is 4 ms).
  double fraction_below(std::size_t edge) const noexcept {
    double f = 0;
    for (std::size_t b = 0; b <= edge && b < counts.size(); ++b) f += fraction(b);
    return f;
  }

  void merge(const LatencyHistogram& o) noexcept {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  }
};

/// Welford running mean and variance.
struct RunningStats {
  std::uint64_t n = 0;
  double mean = 0;
  double m2 = 0;
  double max = 0;

  void add(double x) noexcept {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
    if (n == 1 || x > max) max = x;
  }

  double variance() const noexcept { return n < 2 ? 0.0 : m2 / static_cast<double>(n - 1); }
  double stddev() const noexcept { return std::sqrt(variance()); }

  // Chan et al. parallel combination.
  void merge(const RunningStats& o) noexcept {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
    mean += d * static_cast<double>(o.n) / total;
    n += o.n;
    if (o.max > max) max = o.max;
  }
};

struct EntityMetrics {
  std::uint64_t ops = 0;
  std::uint64_t bytes = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t promoted = 0;
  std::uint64_t throttled_dispatches = 0;  // dispatches while over a limit; must stay 0 under IORM
  RunningStats latency_us;
  RunningStats queue_us;  // time in scheduler queues before dispatch
  LatencyHistogram histogram;

  void merge(const EntityMetrics& o) noexcept {
    ops += o.ops;
    bytes += o.bytes;
    reads += o.reads;
    writes += o.writes;
    cache_hits += o.cache_hits;
    cache_misses += o.cache_misses;
    promoted += o.promoted;
    throttled_dispatches += o.throttled_dispatches;
    latency_us.merge(o.latency_us);
    queue_us.merge(o.queue_us);
    histogram.merge(o.histogram);
  }
};

/// Per-node utilization over the measurement window, from interval rows.
struct NodeUtilization {
  std::string id;
  bool limited = false;
  double effective_budget = 1.0;
  double used = 0;       // normalized cost seconds
  double available = 0;  // capacity seconds
  int intervals = 0;
  int quanta = 0;
  int quanta_throttled = 0;
  double max_abs_carry = 0;

  double utilization() const noexcept { return available > 0 ? used / available : 0.0; }
};

/// Static plan facts for report rows.
struct NodeInfo {
  std::string level;
  std::uint32_t shares = 1;
  std::optional<double> limit;
  double share_fraction = 1.0;
  double effective_limit = 1.0;  // multiplicative cascade
  bool limited = false;
  bool implicit = false;
};

struct TimeseriesPoint {
  double t = 0;
  std::string mode;
  std::uint64_t promotions = 0;
  std::map<std::string, std::uint64_t> ops;    // completed in the preceding second
  std::map<std::string, std::uint64_t> bytes;
};

/// Everything a run produces; reports are rendered from this alone.
struct RunReport {
  std::string scenario;
  std::string variant;
  std::string scheduler;
  std::uint64_t seed = 0;
  double duration_s = 0;
  double warmup_s = 0;
  std::string final_mode;

  std::map<std::string, EntityMetrics> entities;  // leaves, measured window only
  std::vector<std::string> node_order;            // final plan order
  std::map<std::string, std::vector<std::string>> node_leaves;
  std::map<std::string, NodeInfo> node_info;
  std::map<std::string, NodeUtilization> utilization;
  std::vector<UtilizationRow> intervals;
  std::vector<TimeseriesPoint> timeseries;
  std::map<std::string, std::uint64_t> modes;  // evaluations per mode

  std::uint64_t generated = 0;
  std::uint64_t completed = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t queued = 0;
  std::uint64_t starved = 0;
  std::uint64_t promotions = 0;
  std::uint64_t lottery_draws = 0;
  std::uint64_t events = 0;

  double window_s() const noexcept { return duration_s > warmup_s ? duration_s - warmup_s : 0.0; }

  double ops_per_s(const std::string& id) const {
    auto w = window_s();
    return w > 0 ? static_cast<double>(aggregate(id).ops) / w : 0.0;
  }
  double mb_per_s(const std::string& id) const {
    auto w = window_s();
    return w > 0 ? static_cast<double>(aggregate(id).bytes) / 1e6 / w : 0.0;
  }

  /// Metrics of a leaf, or the merge over the leaves below an inner node.
  EntityMetrics aggregate(const std::string& id) const {
    EntityMetrics m;
    if (auto it = node_leaves.find(id); it != node_leaves.end()) {
      for (const auto& leaf : it->second)
        if (auto e = entities.find(leaf); e != entities.end()) m.merge(e->second);
      return m;
    }
    if (auto e = entities.find(id); e != entities.end()) m = e->second;
    return m;
  }

  double utilization_of(const std::string& id) const {
    auto it = utilization.find(id);
    return it == utilization.end() ? 0.0 : it->second.utilization();
  }
};

}  // namespace iorm
