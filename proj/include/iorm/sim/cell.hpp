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

// One simulated storage cell: HDDs behind a flash cache, or flash alone.
// Every device has its own dispatcher; all share one accounting ledger and
// one plan. Requests leave the generators as tagged buffers and are
// classified on the storage side, as on the real path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "iorm/accounting.hpp"
#include "iorm/cache.hpp"
#include "iorm/devices.hpp"
#include "iorm/error.hpp"
#include "iorm/hierarchy.hpp"
#include "iorm/scheduler.hpp"
#include "iorm/sim/event_queue.hpp"
#include "iorm/sim/metrics.hpp"
#include "iorm/sim/rng.hpp"
#include "iorm/sim/scenario.hpp"
#include "iorm/sim/workload.hpp"
#include "iorm/tags.hpp"

namespace iorm {

class Cell {
 public:
  Cell(const ScenarioConfig& cfg, std::uint64_t seed, std::ostream* trace = nullptr)
      : cfg_(cfg), seed_(seed), trace_(trace), plans_(std::make_shared<const ResourcePlan>(build_plan(cfg.plan))) {
    plan_ = plans_.current();
    const auto& cell = cfg_.cell;
    ledger_ = AccountingLedger(*plan_, static_cast<double>(cell.hdd + cell.flash), cfg_.accounting);
    for (int i = 0; i < cell.hdd; ++i) add_device(DeviceKind::Hdd, "hdd" + std::to_string(i));
    for (int i = 0; i < cell.flash; ++i) add_device(DeviceKind::Flash, "flash" + std::to_string(i));
    if (cell.cache_bytes > 0 && cell.hdd > 0 && cell.flash > 0) {
      cache_.emplace(cell.cache_bytes);
      cache_->set_exclusion_enabled(cell.cache_exclusion);
      for (const auto& [leaf, f] : cfg_.cache_quotas) cache_->set_quota(leaf, f);
    }
    for (const auto& w : cfg_.workloads)
      if (w.enabled) gens_.push_back(Gen{WorkloadGenerator(w, make_rng(seed_, "gen/" + w.name)), 0});
  }

  Cell(const Cell&) = delete;
  Cell& operator=(const Cell&) = delete;

  RunReport run() {
    const SimTime end = sim_epoch() + cfg_.duration;
    prewarm();
    start_generators();
    start_timers(end);
    for (const auto& e : cfg_.events) schedule_event(e);
    q_.run_until(end);
    return finish();
  }

 private:
  struct Device {
    std::string name;
    DeviceModel model;
    std::unique_ptr<DeviceScheduler> sched;
    ChannelPool channels;
    Rng rng;
    std::unordered_map<std::uint64_t, IoRequest> admitted;
  };

  struct Gen {
    WorkloadGenerator gen;
    std::uint64_t outstanding = 0;
  };

  struct Live {
    std::size_t gen = 0;
    bool closed = false;
    std::size_t device = 0;
    bool hit = false;
    bool from_hdd = false;
    std::uint32_t remaining = 1;
    std::optional<SimTime> last_dispatch;
    IoRequest req;
  };

  void add_device(DeviceKind kind, std::string name) {
    const auto& cell = cfg_.cell;
    Device d;
    d.name = std::move(name);
    if (kind == DeviceKind::Hdd) {
      d.model = hdd_model();
      d.model.hdd = cell.hdd_params;
      if (cell.write_cache)
        d.model.write_cache = WriteCacheState(cell.write_cache_bytes, cell.flush_bytes_per_s, cell.pressure_threshold);
      else
        d.model.write_cache.reset();
    } else {
      d.model = flash_model(cell.flash_channels);
      d.model.flash = cell.flash_params;
    }
    d.channels = ChannelPool(d.model.channels);
    d.rng = make_rng(seed_, "dev/" + d.name);
    d.sched = std::make_unique<DeviceScheduler>(kind, kind == DeviceKind::Hdd ? cell.hdd_targets : cell.flash_targets,
                                                plan_, make_rng(seed_, "sched/" + d.name), cfg_.sched, &ledger_);
    const std::size_t index = devices_.size();
    DeviceScheduler::Hooks hooks;
    hooks.next_id = [this] { return next_id_++; };
    hooks.on_fragment = [this, index](const IoRequest& parent, const std::vector<IoRequest>& pieces) {
      on_fragment(index, parent, pieces);
    };
    hooks.on_promote = [this, index](const IoRequest& r) { on_promote(index, r); };
    hooks.on_admit = [this, index](const IoRequest& r) { on_admit(index, r); };
    d.sched->set_hooks(std::move(hooks));
    (kind == DeviceKind::Hdd ? hdd_ : flash_).push_back(index);
    devices_.push_back(std::move(d));
  }

  SimTime now() const noexcept { return q_.now(); }
  bool measuring() const noexcept { return now() >= sim_epoch() + cfg_.warmup; }

  void trace(std::string_view kind, const IoRequest& r, std::size_t device) {
    if (!trace_) return;
    *trace_ << now().time_since_epoch().count() << ' ' << kind << ' ' << r.id << ' ';
    if (r.parent_id)
      *trace_ << *r.parent_id;
    else
      *trace_ << '-';
    *trace_ << ' ' << r.classification.leaf << ' ' << devices_[device].name << '\n';
  }

  // ---- generators -------------------------------------------------------

  void prewarm() {
    if (!cache_) return;
    for (const auto& g : gens_) {
      const auto& spec = g.gen.spec();
      if (!spec.prewarm) continue;
      IoTag tag;
      tag.database_id = spec.database_id;
      tag.workload_key = spec.workload_key;
      tag.file_number = default_file_for(spec.category.value_or(Category::BufferCacheRead));
      auto c = classify(cfg_.registry, *plan_, tag);
      for (std::uint64_t i = 0; i < g.gen.working_set_blocks(); ++i) cache_->admit(c, g.gen.block_at(i), spec.size);
    }
    cache_->reset_stats();
  }

  bool active(const Gen& g) const {
    const auto& s = g.gen.spec();
    return !s.stop || now() < sim_epoch() + *s.stop;
  }

  void start_generators() {
    for (std::size_t gi = 0; gi < gens_.size(); ++gi) {
      auto& g = gens_[gi];
      const auto& s = g.gen.spec();
      const SimTime start = sim_epoch() + s.start;
      if (s.arrival == Arrival::Closed) {
        for (int k = 0; k < s.sessions; ++k) q_.schedule(start + g.gen.stagger(), [this, gi] { issue(gi, true); });
      } else {
        const Duration first = s.arrival == Arrival::Periodic ? s.phase : g.gen.interarrival();
        q_.schedule(start + first, [this, gi] { arrive(gi); });
      }
    }
  }

  void arrive(std::size_t gi) {
    if (!active(gens_[gi])) return;
    issue(gi, false);
    q_.after(gens_[gi].gen.interarrival(), [this, gi] { arrive(gi); });
  }

  void issue(std::size_t gi, bool closed) {
    auto& g = gens_[gi];
    if (!active(g)) return;
    DraftIo d = g.gen.next();
    const EncodedTag wire = encode_tag(d.tag);

    IoRequest r;
    r.id = next_id_++;
    r.classification = classify_bytes(cfg_.registry, *plan_, wire);
    r.size = d.size;
    r.direction = d.direction;
    r.locality = d.locality;
    r.block = d.block;
    r.arrival = now();
    r.enqueue = now();

    Live l;
    l.gen = gi;
    l.closed = closed;
    l.device = route(r, l.hit, l.from_hdd);
    l.req = r;
    ++generated_;
    ++g.outstanding;
    window_.record(r.classification.leaf, r.size, r.classification.priority);
    trace("gen", r, l.device);
    const std::size_t dev = l.device;
    live_.emplace(r.id, std::move(l));
    submit(dev, std::move(r));
  }

  std::size_t pick(const std::vector<std::size_t>& pool, std::uint64_t block) const {
    const std::uint64_t stripe = std::max<std::uint64_t>(1, cfg_.cell.stripe_bytes / kBlockSize);
    return pool[splitmix64(block / stripe) % pool.size()];
  }

  std::size_t route(const IoRequest& r, bool& hit, bool& from_hdd) {
    hit = false;
    from_hdd = false;
    if (hdd_.empty()) return pick(flash_, r.block);
    if (cache_ && cache_available_) {
      if (r.direction == Direction::Read) {
        hit = cache_->lookup(r.block, r.classification.leaf);
        if (hit) return pick(flash_, r.block);
      } else if (r.classification.cache_policy == CachePolicy::WriteBack) {
        if (resident_after(cache_->admit(r.classification, r.block, r.size, true))) return pick(flash_, r.block);
      }
    }
    from_hdd = true;
    return pick(hdd_, r.block);
  }

  // ---- dispatch path ----------------------------------------------------

  void submit(std::size_t dev, IoRequest r) {
    trace("enq", r, dev);
    std::vector<IoRequest> now_out;
    devices_[dev].sched->enqueue(std::move(r), now(), now_out);
    for (auto& x : now_out) start(dev, std::move(x));
    pump(dev);
  }

  void pump(std::size_t dev) {
    for (auto& r : devices_[dev].sched->dispatch(now())) start(dev, std::move(r));
    if (demote_) {
      demote_ = false;
      for (auto& d : devices_) d.sched->demote_throttled();
    }
  }

  // Reserve the expected cost of a queued dispatch against its limits.
  void on_admit(std::size_t dev, const IoRequest& r) {
    if (!ledger_.any_limits()) return;
    const auto& d = devices_[dev];
    auto i = plan_->find(r.classification.leaf);
    if (!i) return;
    // Checked before this request's own reservation. Flash high-priority I/O
    // is admitted at enqueue and never passes through here.
    if (ledger_.path_throttled(*i) && measuring()) ++metrics_[r.classification.leaf].throttled_dispatches;
    const double est = mean_service_us(d.model, r.shape()) / 1e6 / d.model.rated_capacity;
    committed_.emplace(r.id, std::make_pair(r.classification.leaf, est));
    if (ledger_.commit(*i, est)) demote_ = true;
  }

  void pump_all() {
    for (std::size_t i = 0; i < devices_.size(); ++i) pump(i);
  }

  void on_fragment(std::size_t dev, const IoRequest& parent, const std::vector<IoRequest>& pieces) {
    auto it = live_.find(parent.id);
    if (it == live_.end()) throw Error(Errc::InvariantViolation, "fragmenting unknown request");
    it->second.remaining = static_cast<std::uint32_t>(pieces.size());
    for (const auto& p : pieces) {
      piece_parent_.emplace(p.id, parent.id);
      trace("frag", p, dev);
    }
  }

  void on_promote(std::size_t dev, const IoRequest& r) {
    trace("promote", r, dev);
    if (measuring()) ++metrics_[r.classification.leaf].promoted;
  }

  void start(std::size_t dev, IoRequest r) {
    auto& d = devices_[dev];
    trace("dispatch", r, dev);
    const std::uint64_t top = r.parent_id.value_or(r.id);
    auto lit = live_.find(top);
    if (lit == live_.end()) throw Error(Errc::InvariantViolation, "dispatch of unknown request");
    lit->second.last_dispatch = now();

    const std::uint64_t id = r.id;
    if (d.model.kind == DeviceKind::Hdd && r.direction == Direction::Write && d.model.write_cache &&
        d.model.write_cache->absorb(r.size)) {
      auto s = sample_service_time(d.model, r.shape(), d.rng, true);
      d.admitted.emplace(id, std::move(r));
      q_.after(s.time, [this, dev, id, t = s.time] { complete(dev, id, t, false); });
      return;
    }
    d.admitted.emplace(id, std::move(r));
    if (d.channels.arrive(id)) begin(dev, id);
  }

  void begin(std::size_t dev, std::uint64_t id) {
    auto& d = devices_[dev];
    const auto& r = d.admitted.at(id);
    auto s = sample_service_time(d.model, r.shape(), d.rng, false);
    q_.after(s.time, [this, dev, id, t = s.time] { complete(dev, id, t, true); });
  }

  void complete(std::size_t dev, std::uint64_t id, Duration service, bool channel) {
    auto& d = devices_[dev];
    auto node = d.admitted.extract(id);
    if (node.empty()) throw Error(Errc::DoubleCompletion, "request " + std::to_string(id) + " completed twice");
    IoRequest r = std::move(node.mapped());
    d.sched->complete(id, service);
    trace("complete", r, dev);

    // Looked up by id: a plan swap may have renumbered the nodes.
    if (auto c = committed_.extract(id))
      if (auto i = plan_->find(c.mapped().first)) ledger_.release(*i, c.mapped().second);
    if (auto i = plan_->find(r.classification.leaf)) {
      if (ledger_.record_completion(*i, service, d.model.rated_capacity))
        for (auto& x : devices_) x.sched->demote_throttled();
    }
    if (channel)
      if (auto next = d.channels.release()) begin(dev, *next);

    if (r.parent_id) {
      piece_parent_.erase(r.id);
      auto& l = live_.at(*r.parent_id);
      if (--l.remaining == 0) finish(*r.parent_id);
    } else {
      finish(r.id);
    }
    pump(dev);
  }

  void finish(std::uint64_t id) {
    auto node = live_.extract(id);
    Live& l = node.mapped();
    const IoRequest& r = l.req;
    ++completed_;
    auto& g = gens_[l.gen];
    --g.outstanding;

    if (cache_ && cache_available_ && l.from_hdd && r.direction == Direction::Read)
      cache_->admit(r.classification, r.block, r.size);

    const auto& leaf = r.classification.leaf;
    tick_ops_[leaf] += 1;
    tick_bytes_[leaf] += r.size;
    if (measuring()) {
      auto& m = metrics_[leaf];
      const Duration latency = now() - r.arrival;
      ++m.ops;
      m.bytes += r.size;
      (r.direction == Direction::Read ? m.reads : m.writes) += 1;
      if (cache_ && r.direction == Direction::Read) (l.hit ? m.cache_hits : m.cache_misses) += 1;
      m.latency_us.add(static_cast<double>(latency.count()));
      m.queue_us.add(static_cast<double>((l.last_dispatch.value_or(now()) - r.enqueue).count()));
      m.histogram.add(latency);
    }
    if (l.closed && active(g)) {
      const std::size_t gi = l.gen;
      q_.after(g.gen.think(), [this, gi] { issue(gi, true); });
    }
  }

  // ---- timers -----------------------------------------------------------

  void every(Duration period, SimTime end, std::function<void()> fn) {
    auto shared = std::make_shared<std::function<void()>>();
    *shared = [this, period, end, fn = std::move(fn), shared_w = std::weak_ptr<std::function<void()>>(shared)] {
      fn();
      if (now() + period <= end)
        if (auto s = shared_w.lock()) q_.after(period, [s] { (*s)(); });
    };
    timers_.push_back(shared);
    if (sim_epoch() + period <= end) q_.schedule(sim_epoch() + period, [shared] { (*shared)(); });
  }

  void start_timers(SimTime end) {
    every(cfg_.accounting.quantum, end, [this] { on_quantum(); });
    every(cfg_.deadline_scan, end, [this] {
      for (std::size_t i = 0; i < devices_.size(); ++i)
        if (devices_[i].sched->deadline_scan(now()) > 0) pump(i);
    });
    every(Duration{100'000}, end, [this] {
      for (auto i : hdd_) {
        auto& d = devices_[i];
        if (!d.model.write_cache) continue;
        bool was = d.sched->write_pressure();
        d.sched->set_write_pressure(d.model.write_cache->tick(Duration{100'000}));
        if (was && !d.sched->write_pressure()) pump(i);
      }
    });
    every(cfg_.mode_period, end, [this] { on_mode(); });
    every(cfg_.stats_period, end, [this] { on_stats(); });
  }

  void on_quantum() {
    if (ledger_.end_quantum()) {
      auto rows = ledger_.reconcile(interval_start_, now());
      for (auto& row : rows) record_row(row);
      interval_start_ = now();
    }
    bool changed = false;
    if (plans_.apply_pending()) {
      plan_ = plans_.current();
      ledger_.rebind(*plan_);
      for (auto& d : devices_) d.sched->set_plan(plan_);
      changed = true;
    }
    changed = ledger_.evaluate() || changed;
    if (changed) {
      for (auto& d : devices_) d.sched->demote_throttled();
      pump_all();
    }
  }

  void record_row(const UtilizationRow& row) {
    if (row.start >= sim_epoch() + cfg_.warmup) {
      auto& u = utilization_[row.entity];
      u.id = row.entity;
      u.limited = row.limited;
      u.effective_budget = row.effective_budget;
      const double cap = ledger_.interval_capacity();
      u.used += row.utilization * cap;
      u.available += cap;
      ++u.intervals;
      u.quanta += cfg_.accounting.quanta_per_interval;
      u.quanta_throttled += row.quanta_throttled;
      u.max_abs_carry = std::max(u.max_abs_carry, std::abs(row.carry));
    }
    intervals_.push_back(row);
  }

  void on_mode() {
    const Objective objective = cfg_.objective_override.value_or(plan_->objective());
    const Mode m = evaluate_mode(window_, objective);
    window_ = {};
    ++modes_[std::string(to_string(m))];
    for (auto& d : devices_) d.sched->set_mode(m);
    pump_all();
  }

  void on_stats() {
    TimeseriesPoint p;
    p.t = to_seconds(now());
    p.mode = devices_.empty() ? "" : std::string(to_string(devices_.front().sched->mode()));
    for (const auto& d : devices_) p.promotions += d.sched->promotions();
    p.ops = std::move(tick_ops_);
    p.bytes = std::move(tick_bytes_);
    tick_ops_.clear();
    tick_bytes_.clear();
    timeseries_.push_back(std::move(p));
  }

  void schedule_event(const EventSpec& e) {
    q_.schedule(sim_epoch() + e.at, [this, &e] {
      if (e.plan) plans_.publish(std::make_shared<const ResourcePlan>(build_plan(*e.plan)));
      if (e.cache_available) {
        cache_available_ = *e.cache_available;
        for (auto& d : devices_) d.sched->set_cache_available(cache_available_);
        pump_all();
      }
      if (e.cache_exclusion && cache_) cache_->set_exclusion_enabled(*e.cache_exclusion);
    });
  }

  // ---- end of run -------------------------------------------------------

  void audit(RunReport& rep) const {
    std::unordered_map<std::uint64_t, int> seen;
    for (const auto& d : devices_) {
      if (static_cast<std::size_t>(d.sched->in_flight().outstanding()) != d.admitted.size())
        throw Error(Errc::InvariantViolation, d.name + ": in-flight bookkeeping disagrees with the device");
      auto count = [&](std::uint64_t id) {
        auto pp = piece_parent_.find(id);
        std::uint64_t top = pp == piece_parent_.end() ? id : pp->second;
        if (!live_.count(top)) throw Error(Errc::InvariantViolation, "request " + std::to_string(id) + " is orphaned");
        ++seen[top];
      };
      for (auto id : d.sched->waiting_ids()) count(id);
      for (const auto& [id, r] : d.admitted) count(id);
    }
    std::uint64_t dispatched = 0;
    for (const auto& [id, l] : live_) {
      int want = static_cast<int>(l.remaining);
      if (seen[id] != want)
        throw Error(Errc::InvariantViolation, "request " + std::to_string(id) + " appears " +
                                                  std::to_string(seen[id]) + " times, expected " + std::to_string(want));
      if (l.last_dispatch) ++dispatched;
    }
    if (generated_ != completed_ + live_.size())
      throw Error(Errc::InvariantViolation, "generated requests are not conserved");
    for (const auto& g : gens_)
      if (g.gen.spec().arrival == Arrival::Closed && g.outstanding > static_cast<std::uint64_t>(g.gen.spec().sessions))
        throw Error(Errc::InvariantViolation, g.gen.spec().name + " exceeds its session count");
    rep.in_flight = dispatched;
    rep.queued = live_.size() - dispatched;
  }

  RunReport finish() {
    RunReport rep;
    rep.scenario = cfg_.name;
    rep.variant = cfg_.variant;
    rep.scheduler = std::string(to_string(cfg_.scheduler));
    rep.seed = seed_;
    rep.duration_s = to_seconds(cfg_.duration);
    rep.warmup_s = to_seconds(cfg_.warmup);
    rep.final_mode = devices_.empty() ? "" : std::string(to_string(devices_.front().sched->mode()));
    rep.generated = generated_;
    rep.completed = completed_;
    rep.events = q_.fired();
    for (const auto& d : devices_) {
      rep.starved += d.sched->starved();
      rep.promotions += d.sched->promotions();
      rep.lottery_draws += d.sched->lottery_draws();
    }
    audit(rep);

    // Every leaf gets a row even if it saw no traffic.
    for (auto leaf : plan_->leaves()) rep.entities[plan_->node(leaf).id];
    for (auto& [k, v] : metrics_) rep.entities[k] = v;
    for (NodeIndex i = 1; i < plan_->size(); ++i) {
      const auto& n = plan_->node(i);
      rep.node_order.push_back(n.id);
      auto alloc = effective_allocation(*plan_, n.id);
      rep.node_info[n.id] = NodeInfo{n.level.name(), n.shares, n.limit, alloc.share_fraction,
                                     alloc.effective_limit, alloc.limited, n.implicit};
      if (n.children.empty()) continue;
      auto& leaves = rep.node_leaves[n.id];
      for (auto leaf : plan_->leaves())
        for (auto a : plan_->path_to(leaf))
          if (a == i) leaves.push_back(plan_->node(leaf).id);
    }
    rep.utilization = utilization_;
    rep.intervals = intervals_;
    rep.timeseries = timeseries_;
    rep.modes = modes_;
    return rep;
  }

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  std::ostream* trace_;
  EventQueue q_;
  PlanHandle plans_;
  std::shared_ptr<const ResourcePlan> plan_;
  AccountingLedger ledger_;
  std::unordered_map<std::uint64_t, std::pair<std::string, double>> committed_;
  bool demote_ = false;
  std::optional<FlashCache> cache_;
  bool cache_available_ = true;
  std::vector<Device> devices_;
  std::vector<std::size_t> hdd_;
  std::vector<std::size_t> flash_;
  std::vector<Gen> gens_;
  std::unordered_map<std::uint64_t, Live> live_;
  std::unordered_map<std::uint64_t, std::uint64_t> piece_parent_;
  std::vector<std::shared_ptr<std::function<void()>>> timers_;
  ModeWindowStats window_;
  std::uint64_t next_id_ = 1;
  std::uint64_t generated_ = 0;
  std::uint64_t completed_ = 0;
  SimTime interval_start_{};

  std::map<std::string, EntityMetrics> metrics_;
  std::map<std::string, NodeUtilization> utilization_;
  std::vector<UtilizationRow> intervals_;
  std::vector<TimeseriesPoint> timeseries_;
  std::map<std::string, std::uint64_t> tick_ops_;
  std::map<std::string, std::uint64_t> tick_bytes_;
  std::map<std::string, std::uint64_t> modes_;
};

/// Run one scenario variant end to end.
inline RunReport run_scenario(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed = {},
                              std::ostream* trace = nullptr) {
  Cell cell(cfg, seed.value_or(cfg.seed), trace);
  return cell.run();
}

}  // namespace iorm
