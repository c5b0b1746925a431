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

// Per-device dispatcher. Requests wait in per-leaf FIFO queues; each dispatch
// picks a leaf by a hierarchical lottery (one draw per level with more than
// one eligible child) and sends its head request if the device's in-flight
// budget admits it. Requests that have waited past the deadline threshold
// move to a starved list that is served before the lottery, unless their
// entity is over a hard limit.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iorm/accounting.hpp"
#include "iorm/clock.hpp"
#include "iorm/devices.hpp"
#include "iorm/hierarchy.hpp"
#include "iorm/sim/rng.hpp"
#include "iorm/tags.hpp"

namespace iorm {

enum class Mode : std::uint8_t { Solo, LatencySensitivePriority, ThroughputOriented, Normal };

constexpr std::string_view to_string(Mode m) noexcept {
  switch (m) {
    case Mode::Solo: return "solo";
    case Mode::LatencySensitivePriority: return "latency-priority";
    case Mode::ThroughputOriented: return "throughput";
    case Mode::Normal: return "normal";
  }
  return "normal";
}

enum class SchedulerKind : std::uint8_t { Iorm, Bypass };

constexpr std::string_view to_string(SchedulerKind k) noexcept { return k == SchedulerKind::Iorm ? "iorm" : "bypass"; }

struct IoRequest {
  std::uint64_t id = 0;
  Classification classification;
  NodeIndex leaf = 0;
  std::uint64_t size = 8 * kKiB;
  Direction direction = Direction::Read;
  Locality locality = Locality::Random;
  std::uint64_t block = 0;  // cache key
  SimTime arrival;
  SimTime enqueue;
  std::optional<std::uint64_t> parent_id;

  IoShape shape() const noexcept { return {size, direction, locality}; }
  IoClass cls() const noexcept { return io_class(shape(), classification.priority); }
};

/// Split `r` into ceil(size / chunk) pieces sharing r's identity as parent.
/// Requests no larger than `chunk` come back unchanged.
inline std::vector<IoRequest> fragment(const IoRequest& r, std::uint64_t chunk,
                                       const std::function<std::uint64_t()>& next_id) {
  if (chunk == 0) throw Error(Errc::InvalidDirective, "zero fragment size");
  if (r.size <= chunk) return {r};
  std::vector<IoRequest> out;
  out.reserve((r.size + chunk - 1) / chunk);
  for (std::uint64_t off = 0; off < r.size; off += chunk) {
    IoRequest f = r;
    f.id = next_id();
    f.size = std::min(chunk, r.size - off);
    f.block = r.block + off / kBlockSize;
    f.parent_id = r.id;
    out.push_back(std::move(f));
  }
  return out;
}

struct ModeWindowStats {
  struct Leaf {
    std::uint64_t requests = 0;
    std::uint64_t small = 0;
    std::uint64_t high = 0;
  };
  std::map<std::string, Leaf> leaves;

  void record(const std::string& leaf, std::uint64_t size, Priority p) {
    auto& l = leaves[leaf];
    ++l.requests;
    if (size_class(size) == SizeClass::Small) ++l.small;
    if (p == Priority::High) ++l.high;
  }
};

struct ModeThresholds {
  double small_fraction = 0.7;
  double large_fraction = 0.7;
};

/// Classify the last window's traffic. An explicit objective wins over
/// detection, except that a lone active workload is always Solo.
inline Mode evaluate_mode(const ModeWindowStats& w, Objective objective = Objective::Auto, ModeThresholds th = {}) {
  std::uint64_t active = 0, total = 0, large = 0;
  bool latency = false;
  for (const auto& [id, l] : w.leaves) {
    if (l.requests == 0) continue;
    ++active;
    total += l.requests;
    large += l.requests - l.small;
    if (2 * l.high > l.requests && static_cast<double>(l.small) > th.small_fraction * static_cast<double>(l.requests))
      latency = true;
  }
  if (active == 1) return Mode::Solo;
  switch (objective) {
    case Objective::LowLatency: return Mode::LatencySensitivePriority;
    case Objective::HighThroughput: return Mode::ThroughputOriented;
    case Objective::Balanced: return Mode::Normal;
    case Objective::Auto: break;
  }
  if (latency) return Mode::LatencySensitivePriority;
  if (total > 0 && static_cast<double>(large) > th.large_fraction * static_cast<double>(total))
    return Mode::ThroughputOriented;
  return Mode::Normal;
}

struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::Iorm;
  Duration deadline_threshold{1'000'000};
  std::uint64_t fragment_size = 128 * kKiB;
  int latency_low_concurrency = 2;  // HDD, latency-priority mode
  int pressure_low_writes = 1;      // low-priority writes while the write cache is under pressure
};

struct LeafStats {
  std::uint64_t dispatched = 0;
  std::uint64_t promoted = 0;
  std::size_t queued = 0;
};

struct SchedulerSnapshot {
  Mode mode = Mode::Normal;
  std::uint64_t promotions = 0;
  std::uint64_t lottery_draws = 0;
  std::size_t starved = 0;
  std::map<std::string, LeafStats> leaves;
};

class DeviceScheduler {
 public:
  struct Hooks {
    std::function<std::uint64_t()> next_id;  // ids for fragments
    std::function<void(const IoRequest& parent, const std::vector<IoRequest>& pieces)> on_fragment;
    std::function<void(const IoRequest&)> on_promote;
    std::function<void(const IoRequest&)> on_admit;  // each request leaving dispatch()
  };

  DeviceScheduler(DeviceKind kind, DeviceQueueTargets targets, std::shared_ptr<const ResourcePlan> plan, Rng rng,
                  SchedulerConfig cfg = {}, const AccountingLedger* ledger = nullptr)
      : kind_(kind), base_(targets), cfg_(cfg), rng_(std::move(rng)), ledger_(ledger) {
    set_plan(std::move(plan));
  }

  void set_hooks(Hooks h) { hooks_ = std::move(h); }
  void set_ledger(const AccountingLedger* ledger) noexcept { ledger_ = ledger; }

  DeviceKind device_kind() const noexcept { return kind_; }
  SchedulerKind kind() const noexcept { return cfg_.kind; }
  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode m) noexcept { mode_ = m; }
  void set_cache_available(bool available) noexcept { cache_available_ = available; }
  void set_write_pressure(bool pressure) noexcept { pressure_ = pressure; }
  bool write_pressure() const noexcept { return pressure_; }
  const InFlightState& in_flight() const noexcept { return inflight_; }
  const ResourcePlan& plan() const noexcept { return *plan_; }
  std::uint64_t lottery_draws() const noexcept { return draws_; }
  std::uint64_t promotions() const noexcept { return promotions_; }

  /// Targets in force now, after degraded-mode and mode adjustments.
  DeviceQueueTargets targets() const {
    DeviceQueueTargets t = base_;
    if (kind_ == DeviceKind::Hdd) {
      t = set_degraded_mode(t, cache_available_);
      if (mode_ == Mode::ThroughputOriented && cache_available_) t.read_target = t.normal_read_target;
    }
    if (mode_ == Mode::Solo && kind_ == DeviceKind::Flash) t.flash_lowprio_target = t.raw_queue_limit;
    return t;
  }

  /// Swap in a new plan; queued requests follow their leaf by id, or fall
  /// back to the default leaf if it no longer exists.
  void set_plan(std::shared_ptr<const ResourcePlan> plan) {
    std::vector<IoRequest> all;
    for (auto& q : queues_)
      for (auto& r : q) all.push_back(std::move(r));
    std::map<std::string, LeafStats> by_id;
    if (plan_)
      for (auto& [i, st] : stats_) by_id[plan_->node(i).id] = st;
    stats_.clear();
    plan_ = std::move(plan);
    for (auto& [id, st] : by_id)
      if (auto i = plan_->find(id)) stats_[*i] = st;
    const auto n = plan_->size();
    queues_.assign(n, {});
    pending_below_.assign(n, 0);
    blocked_below_.assign(n, 0);
    std::stable_sort(all.begin(), all.end(), [](const IoRequest& a, const IoRequest& b) { return a.enqueue < b.enqueue; });
    for (auto& r : all) push_back(rebind(std::move(r)));
    for (auto& r : starved_) r = rebind(std::move(r));
  }

  /// Resolve a classification's leaf against the current plan.
  NodeIndex leaf_for(const Classification& c) const {
    if (auto i = plan_->find(c.leaf))
      if (auto l = plan_->resolve_leaf(*i)) return *l;
    return plan_->default_leaf();
  }

  /// Queue a request. Flash high-priority I/O skips the queue and is admitted
  /// at once; such requests are appended to `dispatched`.
  void enqueue(IoRequest r, SimTime now, std::vector<IoRequest>& dispatched) {
    r.enqueue = now;
    if (cfg_.kind == SchedulerKind::Bypass) {
      fifo_.push_back(std::move(r));
      return;
    }
    r = rebind(std::move(r));
    if (kind_ == DeviceKind::Flash && r.classification.priority == Priority::High) {
      admit(r);
      dispatched.push_back(std::move(r));
      return;
    }
    push_back(std::move(r));
  }

  /// Dispatch until nothing admissible remains. Returns the dispatched requests.
  std::vector<IoRequest> dispatch(SimTime now) {
    std::vector<IoRequest> out;
    (void)now;
    if (cfg_.kind == SchedulerKind::Bypass) {
      const auto t = targets();
      while (!fifo_.empty() && inflight_.outstanding() < t.raw_queue_limit) {
        IoRequest r = std::move(fifo_.front());
        fifo_.pop_front();
        inflight_.force_admit(r.id, r.cls(), t, r.classification.leaf);
        out.push_back(std::move(r));
      }
      return out;
    }
    while (true) {
      if (auto r = take_starved()) {
        out.push_back(std::move(*r));
      } else {
        auto leaf = select_leaf();
        if (!leaf) break;
        out.push_back(take_head(*leaf));
      }
      if (hooks_.on_admit) hooks_.on_admit(out.back());
    }
    return out;
  }

  /// Pick the next leaf without dispatching. Exposed for statistical tests.
  std::optional<NodeIndex> select_leaf() {
    exclude_inadmissible();
    std::optional<NodeIndex> pick;
    if (mode_ == Mode::Solo) {
      for (auto l : plan_->leaves()) {
        if (!eligible_leaf(l)) continue;
        if (!pick || queues_[l].front().enqueue < queues_[*pick].front().enqueue) pick = l;
      }
    } else {
      pick = draw(ResourcePlan::root());
    }
    clear_blocked();
    return pick;
  }

  /// Move requests waiting longer than the threshold to the starved list and
  /// send starved requests of throttled entities back to their queues.
  std::size_t deadline_scan(SimTime now) {
    if (cfg_.kind == SchedulerKind::Bypass) return 0;
    demote_throttled();
    std::vector<IoRequest> moved;
    for (auto l : plan_->leaves()) {
      auto& q = queues_[l];
      if (q.empty() || throttled(l)) continue;
      bool was = !q.empty();
      // Fragments re-queued at the head keep their parent's timestamp, so
      // the queue stays ordered by enqueue time.
      while (!q.empty() && now - q.front().enqueue > cfg_.deadline_threshold) {
        moved.push_back(std::move(q.front()));
        q.pop_front();
        ++stats_[l].promoted;
      }
      if (was && q.empty()) note_empty(l);
    }
    std::stable_sort(moved.begin(), moved.end(), [](const IoRequest& a, const IoRequest& b) { return a.enqueue < b.enqueue; });
    for (auto& r : moved) {
      if (hooks_.on_promote) hooks_.on_promote(r);
      starved_.push_back(std::move(r));
    }
    promotions_ += moved.size();
    return moved.size();
  }

  /// Starved entries of entities that just became throttled go back to the
  /// head of their queues, in order.
  void demote_throttled() {
    if (starved_.empty()) return;
    std::deque<IoRequest> keep;
    std::map<NodeIndex, std::vector<IoRequest>> back;
    for (auto& r : starved_) {
      if (throttled(r.leaf))
        back[r.leaf].push_back(std::move(r));
      else
        keep.push_back(std::move(r));
    }
    starved_ = std::move(keep);
    for (auto& [leaf, rs] : back) {
      auto& q = queues_[leaf];
      bool was_empty = q.empty();
      for (auto it = rs.rbegin(); it != rs.rend(); ++it) q.push_front(std::move(*it));
      if (was_empty) note_nonempty(leaf);
    }
  }

  /// Release an in-flight request. Throws DoubleCompletion if unknown.
  InFlightState::Entry complete(std::uint64_t id, Duration service_time = Duration{0}) {
    return inflight_.complete(id, service_time);
  }

  std::size_t queued() const noexcept {
    std::size_t n = fifo_.size();
    for (const auto& q : queues_) n += q.size();
    return n;
  }
  std::size_t starved() const noexcept { return starved_.size(); }
  std::size_t queued(NodeIndex leaf) const { return queues_.at(leaf).size(); }

  /// All queued and starved requests, for audits.
  std::vector<std::uint64_t> waiting_ids() const {
    std::vector<std::uint64_t> ids;
    for (const auto& r : fifo_) ids.push_back(r.id);
    for (const auto& q : queues_)
      for (const auto& r : q) ids.push_back(r.id);
    for (const auto& r : starved_) ids.push_back(r.id);
    return ids;
  }

  /// Ages of queued requests of `leaf`, oldest first.
  std::optional<SimTime> oldest_enqueue(NodeIndex leaf) const {
    const auto& q = queues_.at(leaf);
    if (q.empty()) return std::nullopt;
    return q.front().enqueue;
  }

  SchedulerSnapshot snapshot() const {
    SchedulerSnapshot s;
    s.mode = mode_;
    s.promotions = promotions_;
    s.lottery_draws = draws_;
    s.starved = starved_.size();
    for (auto l : plan_->leaves()) {
      LeafStats ls;
      if (auto it = stats_.find(l); it != stats_.end()) ls = it->second;
      ls.queued = queues_[l].size();
      s.leaves.emplace(plan_->node(l).id, ls);
    }
    return s;
  }

 private:
  IoRequest rebind(IoRequest r) const {
    r.leaf = leaf_for(r.classification);
    r.classification.leaf = plan_->node(r.leaf).id;
    return r;
  }

  bool throttled(NodeIndex leaf) const { return ledger_ && ledger_->any_limits() && ledger_->path_throttled(leaf); }

  bool fragments(const IoRequest& r) const {
    return kind_ == DeviceKind::Hdd && mode_ == Mode::LatencySensitivePriority &&
           r.classification.priority != Priority::High && size_class(r.size) == SizeClass::Large;
  }

  /// Class as it would be dispatched, after any fragmentation.
  IoClass dispatch_class(const IoRequest& r) const {
    IoClass c = r.cls();
    if (fragments(r)) c.size = size_class(std::min<std::uint64_t>(r.size, cfg_.fragment_size));
    return c;
  }

  bool admissible(const IoClass& c, const DeviceQueueTargets& t) const {
    const bool low = c.priority != Priority::High;
    if (low && kind_ == DeviceKind::Hdd && mode_ == Mode::LatencySensitivePriority &&
        inflight_.low_count() >= cfg_.latency_low_concurrency)
      return false;
    if (low && pressure_ && c.direction == Direction::Write && inflight_.low_write_count() >= cfg_.pressure_low_writes)
      return false;
    return inflight_.admissible(kind_, t, c);
  }

  void admit(const IoRequest& r) {
    inflight_.force_admit(r.id, r.cls(), targets(), r.classification.leaf);
    ++stats_[r.leaf].dispatched;
  }

  std::optional<IoRequest> take_starved() {
    if (starved_.empty()) return std::nullopt;
    const auto t = targets();
    for (auto it = starved_.begin(); it != starved_.end(); ++it) {
      if (throttled(it->leaf)) continue;
      if (!admissible(dispatch_class(*it), t)) continue;
      IoRequest r = std::move(*it);
      starved_.erase(it);
      if (fragments(r)) {
        auto pieces = split(r);
        for (auto p = pieces.rbegin(); p + 1 != pieces.rend(); ++p) starved_.push_front(std::move(*p));
        r = std::move(pieces.front());
      }
      admit(r);
      return r;
    }
    return std::nullopt;
  }

  std::vector<IoRequest> split(const IoRequest& r) {
    auto pieces = fragment(r, cfg_.fragment_size, hooks_.next_id ? hooks_.next_id : default_ids());
    if (hooks_.on_fragment) hooks_.on_fragment(r, pieces);
    return pieces;
  }

  std::function<std::uint64_t()> default_ids() {
    return [this] { return (1ULL << 62) + local_ids_++; };
  }

  IoRequest take_head(NodeIndex leaf) {
    auto& q = queues_[leaf];
    IoRequest r = std::move(q.front());
    q.pop_front();
    if (fragments(r)) {
      auto pieces = split(r);
      for (auto p = pieces.rbegin(); p + 1 != pieces.rend(); ++p) q.push_front(std::move(*p));
      r = std::move(pieces.front());
    }
    if (q.empty()) note_empty(leaf);
    admit(r);
    return r;
  }

  void push_back(IoRequest r) {
    auto leaf = r.leaf;
    auto& q = queues_[leaf];
    q.push_back(std::move(r));
    if (q.size() == 1) note_nonempty(leaf);
  }

  void note_nonempty(NodeIndex leaf) {
    for (std::optional<NodeIndex> i = leaf; i; i = plan_->node(*i).parent) ++pending_below_[*i];
  }
  void note_empty(NodeIndex leaf) {
    for (std::optional<NodeIndex> i = leaf; i; i = plan_->node(*i).parent) --pending_below_[*i];
  }

  void block(NodeIndex leaf) {
    for (std::optional<NodeIndex> i = leaf; i; i = plan_->node(*i).parent) ++blocked_below_[*i];
    blocked_.push_back(leaf);
  }

  void clear_blocked() {
    for (auto leaf : blocked_)
      for (std::optional<NodeIndex> i = leaf; i; i = plan_->node(*i).parent) --blocked_below_[*i];
    blocked_.clear();
  }

  // A rejected head or a throttled path closes its leaf for this draw, so a
  // subtree counts as available only if some leaf under it can dispatch.
  // Checking every head up front means one draw per dispatch instead of
  // redraw loops.
  void exclude_inadmissible() {
    if (pending_below_[ResourcePlan::root()] == 0) return;
    const auto t = targets();
    for (auto l : plan_->leaves()) {
      const auto& q = queues_[l];
      if (q.empty()) continue;
      if (throttled(l) || !admissible(dispatch_class(q.front()), t)) block(l);
    }
  }

  bool available(NodeIndex i) const { return pending_below_[i] - blocked_below_[i] > 0; }

  bool eligible_leaf(NodeIndex l) const { return available(l) && !throttled(l); }

  std::optional<NodeIndex> draw(NodeIndex at) {
    while (!plan_->is_leaf(at)) {
      std::uint64_t total = 0;
      std::optional<NodeIndex> only;
      int count = 0;
      for (auto c : plan_->node(at).children) {
        if (!available(c) || node_throttled(c)) continue;
        total += plan_->node(c).shares;
        only = c;
        ++count;
      }
      if (count == 0) return std::nullopt;
      if (count == 1) {
        at = *only;
        continue;
      }
      ++draws_;
      auto ticket = uniform_below(rng_, total);
      for (auto c : plan_->node(at).children) {
        if (!available(c) || node_throttled(c)) continue;
        if (ticket < plan_->node(c).shares) {
          at = c;
          break;
        }
        ticket -= plan_->node(c).shares;
      }
    }
    return at;
  }

  bool node_throttled(NodeIndex i) const { return ledger_ && ledger_->any_limits() && ledger_->throttled(i); }

  DeviceKind kind_;
  DeviceQueueTargets base_;
  SchedulerConfig cfg_;
  Rng rng_;
  const AccountingLedger* ledger_;
  Hooks hooks_;
  std::shared_ptr<const ResourcePlan> plan_;
  Mode mode_ = Mode::Normal;
  bool cache_available_ = true;
  bool pressure_ = false;
  InFlightState inflight_;
  std::vector<std::deque<IoRequest>> queues_;
  std::vector<int> pending_below_;
  std::vector<int> blocked_below_;
  std::vector<NodeIndex> blocked_;
  std::deque<IoRequest> starved_;
  std::deque<IoRequest> fifo_;
  std::map<NodeIndex, LeafStats> stats_;
  std::uint64_t draws_ = 0;
  std::uint64_t promotions_ = 0;
  std::uint64_t local_ids_ = 0;
};

}  // namespace iorm
