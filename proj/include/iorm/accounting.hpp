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

// Cost-based utilization accounting and hard-limit enforcement.
//
// Cost is device busy time normalized by the device's rated capacity, charged
// when an I/O completes. Usage is attributed to the leaf and summed into every
// ancestor. Only nodes that carry an explicit limit get a budget; their budget
// fraction is the product of explicit limits along the path.
//
// Within an interval of Q quanta the budget is cumulative: after k quanta an
// entity may have used L*k*q + c*I, where q and I are the cell capacity of one
// quantum and one interval and c is the carried credit. Checking the running
// total (rather than each quantum in isolation) means an I/O that straddles a
// boundary and lands in the following quantum does not cause a throttle as
// long as the interval as a whole stays within budget.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "iorm/clock.hpp"
#include "iorm/devices.hpp"
#include "iorm/error.hpp"
#include "iorm/hierarchy.hpp"

namespace iorm {

struct AccountingConfig {
  Duration quantum{200'000};
  int quanta_per_interval = 5;
  double clamp = 0.03;  // carry-forward bound, as a fraction of capacity
};

struct UtilizationRow {
  std::string entity;
  SimTime start;
  SimTime end;
  double utilization = 0;  // consumed cost / available cost
  bool limited = false;
  double effective_budget = 1.0;  // multiplicative limit product; 1 if unlimited
  bool throttled = false;         // flag at the end of the interval
  double carry = 0;               // carry after reconciliation
  int quanta_throttled = 0;
};

class AccountingLedger {
 public:
  AccountingLedger() = default;

  /// `capacity_per_second` is the summed normalized capacity of the devices
  /// (1.0 per device when cost is normalized by rated capacity).
  AccountingLedger(const ResourcePlan& plan, double capacity_per_second, AccountingConfig cfg = {})
      : cfg_(cfg), capacity_(capacity_per_second) {
    if (!(capacity_per_second > 0)) throw Error(Errc::InvalidDirective, "accounting capacity must be positive");
    if (cfg.quanta_per_interval <= 0 || cfg.quantum.count() <= 0)
      throw Error(Errc::InvalidDirective, "accounting periods must be positive");
    rebind(plan);
  }

  const AccountingConfig& config() const noexcept { return cfg_; }
  double quantum_capacity() const noexcept { return capacity_ * to_seconds(cfg_.quantum); }
  double interval_capacity() const noexcept { return quantum_capacity() * cfg_.quanta_per_interval; }
  int quanta_elapsed() const noexcept { return k_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adopt a new plan, keeping carry and in-interval usage for ids that persist.
  void rebind(const ResourcePlan& plan) {
    std::vector<Node> next(plan.size());
    for (NodeIndex i = 0; i < plan.size(); ++i) {
      const auto& hn = plan.node(i);
      Node& n = next[i];
      n.id = hn.id;
      n.parent = hn.parent;
      if (hn.limit) {
        double l = 1.0;
        for (auto a : plan.path_to(i))
          if (plan.node(a).limit) l *= *plan.node(a).limit;
        n.limit = l;
      }
      for (const auto& old : nodes_) {
        if (old.id == n.id) {
          n.used_interval = old.used_interval;
          n.used_quantum = old.used_quantum;
          n.committed = old.committed;
          n.carry = n.limit ? old.carry : 0.0;
          n.quanta_throttled = old.quanta_throttled;
          break;
        }
      }
    }
    nodes_ = std::move(next);
    limited_any_ = std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.limit.has_value(); });
    evaluate(k_);
  }

  /// Charge a completed I/O to `leaf` and its ancestors. Returns true if this
  /// pushed some node over its running budget (a new throttle).
  bool record_completion(NodeIndex leaf, Duration service_time, double rated_capacity = 1.0) {
    if (service_time.count() <= 0) return false;
    const double cost = to_seconds(service_time) / rated_capacity;
    for (std::optional<NodeIndex> i = leaf; i; i = nodes_.at(*i).parent) {
      Node& n = nodes_[*i];
      n.used_quantum += cost;
      n.used_interval += cost;
    }
    return check_path(leaf, false);
  }

  /// Reserve the expected normalized cost (seconds) of an I/O at dispatch.
  /// Without this a deep device queue admits a whole burst before the first
  /// completion is charged. A dispatch is allowed while completed plus
  /// committed cost fits the budget at the end of the next quantum, so an I/O
  /// in flight across a boundary is not counted against the quantum it
  /// started in. Boundary evaluation, utilization and carry use completed
  /// cost only.
  bool commit(NodeIndex leaf, double cost) {
    if (!(cost > 0)) return false;
    for (std::optional<NodeIndex> i = leaf; i; i = nodes_.at(*i).parent) nodes_[*i].committed += cost;
    return check_path(leaf, true);
  }

  /// Drop a reservation made by commit(), normally just before the matching
  /// record_completion().
  void release(NodeIndex leaf, double cost) {
    if (!(cost > 0)) return;
    for (std::optional<NodeIndex> i = leaf; i; i = nodes_.at(*i).parent) {
      Node& n = nodes_[*i];
      n.committed = std::max(0.0, n.committed - cost);
    }
  }

  double committed(NodeIndex i) const { return nodes_.at(i).committed; }

  /// Close the current quantum. Returns true when this also closes an interval;
  /// the caller should then call reconcile() before the next evaluate().
  bool end_quantum() {
    for (auto& n : nodes_) {
      if (n.throttled || n.throttled_this_quantum) ++n.quanta_throttled;
      n.throttled_this_quantum = n.throttled;
      n.used_quantum = 0;
    }
    ++k_;
    return k_ >= cfg_.quanta_per_interval;
  }

  /// Fold the finished interval into carry-forward and reset accumulators.
  std::vector<UtilizationRow> reconcile(SimTime start, SimTime end) {
    std::vector<UtilizationRow> rows;
    rows.reserve(nodes_.size());
    const double cap = interval_capacity();
    for (auto& n : nodes_) {
      if (n.limit) n.carry = std::clamp(n.carry + (*n.limit * cap - n.used_interval) / cap, -cfg_.clamp, cfg_.clamp);
      rows.push_back({n.id, start, end, n.used_interval / cap, n.limit.has_value(), n.limit.value_or(1.0),
                      n.throttled, n.carry, n.quanta_throttled});
      n.used_interval = 0;
      n.quanta_throttled = 0;
    }
    k_ = 0;
    return rows;
  }

  /// Recompute throttle flags at a boundary. Returns true if any flag changed.
  bool evaluate() { return evaluate(k_); }

  bool throttled(NodeIndex i) const { return nodes_.at(i).throttled; }

  /// True if `i` or any ancestor is throttled.
  bool path_throttled(NodeIndex i) const { return limited_any_ && path_throttled_.at(i); }

  bool any_limits() const noexcept { return limited_any_; }
  double carry(NodeIndex i) const { return nodes_.at(i).carry; }
  std::optional<double> limit(NodeIndex i) const { return nodes_.at(i).limit; }
  double used_interval(NodeIndex i) const { return nodes_.at(i).used_interval; }
  double used_quantum(NodeIndex i) const { return nodes_.at(i).used_quantum; }

  /// Running budget after `k` quanta of the current interval.
  double budget(NodeIndex i, int k) const { return budget(nodes_.at(i), k); }

 private:
  struct Node {
    std::string id;
    std::optional<NodeIndex> parent;
    std::optional<double> limit;
    double used_quantum = 0;
    double used_interval = 0;
    double committed = 0;  // expected cost of dispatched, uncompleted I/O
    double carry = 0;
    bool throttled = false;
    bool throttled_this_quantum = false;
    int quanta_throttled = 0;
  };

  double budget(const Node& n, int k) const {
    return *n.limit * k * quantum_capacity() + n.carry * interval_capacity();
  }

  bool check_path(NodeIndex leaf, bool projected) {
    bool newly = false;
    for (std::optional<NodeIndex> i = leaf; i; i = nodes_.at(*i).parent) {
      Node& n = nodes_[*i];
      const bool over = projected ? n.used_interval + n.committed > budget(n, k_ + 2)
                                  : n.used_interval > budget(n, k_ + 1);
      if (n.limit && !n.throttled && over) {
        n.throttled = true;
        n.throttled_this_quantum = true;
        newly = true;
      }
    }
    if (newly) refresh_paths();
    return newly;
  }

  bool evaluate(int k) {
    bool changed = false;
    for (auto& n : nodes_) {
      bool t = n.limit && n.used_interval > budget(n, k);
      if (t != n.throttled) changed = true;
      n.throttled = t;
      n.throttled_this_quantum = n.throttled_this_quantum || t;
    }
    refresh_paths();
    return changed;
  }

  void refresh_paths() {
    path_throttled_.assign(nodes_.size(), false);
    // Parents precede children in plan order.
    for (NodeIndex i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      path_throttled_[i] = n.throttled || (n.parent && path_throttled_[*n.parent]);
    }
  }

  AccountingConfig cfg_;
  double capacity_ = 1.0;
  std::vector<Node> nodes_;
  std::vector<bool> path_throttled_;
  bool limited_any_ = false;
  int k_ = 0;
};

/// Mix of I/O shapes with relative weights.
struct IoProfile {
  struct Part {
    IoShape shape;
    double weight = 1.0;
  };
  std::vector<Part> parts;
};

/// Mean normalized cost (seconds) of one I/O from `profile`, striped evenly
/// across `devices`.
inline double mean_io_cost(const IoProfile& profile, const std::vector<DeviceModel>& devices) {
  if (devices.empty()) throw Error(Errc::InvalidDirective, "empty device set");
  double wsum = 0, cost = 0;
  for (const auto& p : profile.parts) {
    double per_dev = 0;
    for (const auto& d : devices) per_dev += mean_service_us(d, p.shape) / 1e6 / d.rated_capacity;
    cost += p.weight * per_dev / static_cast<double>(devices.size());
    wsum += p.weight;
  }
  if (!(wsum > 0)) throw Error(Errc::InvalidDirective, "empty I/O profile");
  return cost / wsum;
}

/// Translate an IOPS target into a utilization fraction of the device set.
inline double iops_to_percent(double iops, const IoProfile& profile, const std::vector<DeviceModel>& devices) {
  if (iops < 0) throw Error(Errc::InvalidDirective, "negative IOPS");
  double f = iops * mean_io_cost(profile, devices) / static_cast<double>(devices.size());
  if (f > 1.0) throw Error(Errc::InfeasibleTarget, "IOPS target exceeds device capability");
  return f;
}

inline double percent_to_iops(double fraction, const IoProfile& profile, const std::vector<DeviceModel>& devices) {
  if (fraction < 0 || fraction > 1.0) throw Error(Errc::InfeasibleTarget, "utilization fraction outside [0, 1]");
  return fraction * static_cast<double>(devices.size()) / mean_io_cost(profile, devices);
}

}  // namespace iorm
