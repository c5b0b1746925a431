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

// Resource hierarchy: the Root -> CDB -> PDB -> Workload tree, its shares and
// limits, and the composed per-node allocations derived from them.

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iorm/error.hpp"

namespace iorm {

/// Depth rank of a hierarchy level. Root is 0; the shipped configuration uses
/// CDB = 1, PDB = 2, Workload = 3. Deeper ranks are accepted for extended trees.
class Level {
 public:
  constexpr explicit Level(int rank) noexcept : rank_(rank) {}

  static constexpr Level root() noexcept { return Level{0}; }
  static constexpr Level cdb() noexcept { return Level{1}; }
  static constexpr Level pdb() noexcept { return Level{2}; }
  static constexpr Level workload() noexcept { return Level{3}; }

  constexpr int rank() const noexcept { return rank_; }
  constexpr auto operator<=>(const Level&) const noexcept = default;

  std::string name() const {
    switch (rank_) {
      case 0: return "root";
      case 1: return "cdb";
      case 2: return "pdb";
      case 3: return "workload";
      default: return "level" + std::to_string(rank_);
    }
  }

  /// Accepts "cdb", "pdb", "workload", "levelN" or a bare rank.
  static std::optional<Level> parse(std::string_view text) {
    if (text == "cdb") return cdb();
    if (text == "pdb") return pdb();
    if (text == "workload") return workload();
    if (text.starts_with("level")) text.remove_prefix(5);
    int rank = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), rank);
    if (ec != std::errc{} || ptr != text.data() + text.size() || rank < 1) return std::nullopt;
    return Level{rank};
  }

 private:
  int rank_;
};

enum class Objective { LowLatency, HighThroughput, Balanced, Auto };

constexpr std::string_view to_string(Objective o) noexcept {
  switch (o) {
    case Objective::LowLatency: return "low-latency";
    case Objective::HighThroughput: return "high-throughput";
    case Objective::Balanced: return "balanced";
    case Objective::Auto: return "auto";
  }
  return "auto";
}

inline std::optional<Objective> parse_objective(std::string_view s) {
  if (s == "low-latency" || s == "low_latency") return Objective::LowLatency;
  if (s == "high-throughput" || s == "high_throughput") return Objective::HighThroughput;
  if (s == "balanced") return Objective::Balanced;
  if (s == "auto") return Objective::Auto;
  return std::nullopt;
}

/// One declared node. `parent` empty means the node hangs off the root.
struct NodeSpec {
  std::string id;
  std::string parent;
  Level level = Level::cdb();
  std::int64_t shares = 1;
  std::optional<double> limit;
  bool untagged_default = false;
};

struct PlanSpec {
  std::vector<NodeSpec> nodes;
  Objective objective = Objective::Auto;
  std::uint64_t version = 1;
};

using NodeIndex = std::size_t;

struct HierarchyNode {
  std::string id;
  Level level = Level::root();
  std::optional<NodeIndex> parent;
  std::vector<NodeIndex> children;
  std::uint32_t shares = 1;
  std::optional<double> limit;
  bool implicit = false;
};

struct EffectiveAllocation {
  std::string id;
  double share_fraction = 1.0;
  // Product of the limits along the root-to-node path (absent limit = 1.0).
  // Because every factor is <= 1 the product is also the tightest cascaded
  // budget on the path, which is what enforcement observes.
  double effective_limit = 1.0;
  bool limited = false;
};

class ResourcePlan;
ResourcePlan build_plan(const PlanSpec& spec);

/// Immutable, validated hierarchy snapshot. Node 0 is the synthetic root and
/// nodes are stored in depth-first declaration order.
class ResourcePlan {
 public:
  const std::vector<HierarchyNode>& nodes() const noexcept { return nodes_; }
  const HierarchyNode& node(NodeIndex i) const { return nodes_.at(i); }
  static constexpr NodeIndex root() noexcept { return 0; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Objective objective() const noexcept { return objective_; }
  std::uint64_t version() const noexcept { return version_; }
  int leaf_level() const noexcept { return leaf_level_; }

  std::optional<NodeIndex> find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  NodeIndex index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw Error(Errc::UnknownNode, "no node '" + std::string(id) + "'");
  }

  bool is_leaf(NodeIndex i) const { return nodes_.at(i).children.empty() && i != root(); }
  NodeIndex default_leaf() const noexcept { return default_leaf_; }
  const std::vector<NodeIndex>& leaves() const noexcept { return leaves_; }

  /// Root-exclusive path from the top level down to `i`.
  std::vector<NodeIndex> path_to(NodeIndex i) const {
    std::vector<NodeIndex> path;
    for (std::optional<NodeIndex> cur = i; cur && *cur != root(); cur = nodes_[*cur].parent)
      path.push_back(*cur);
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Resolve a node to the leaf that receives its traffic: the node itself if
  /// it is a leaf, otherwise its chain of children named "<id>/default".
  std::optional<NodeIndex> resolve_leaf(NodeIndex i) const {
    while (!is_leaf(i)) {
      auto next = find(nodes_[i].id + "/default");
      if (!next || nodes_[*next].parent != i) return std::nullopt;
      i = *next;
    }
    return i;
  }

  /// The declared (non-implicit) nodes, suitable for rebuilding this plan.
  PlanSpec to_spec() const {
    PlanSpec spec;
    spec.objective = objective_;
    spec.version = version_;
    for (NodeIndex i = 1; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.implicit) continue;
      NodeSpec s;
      s.id = n.id;
      s.parent = (n.parent && *n.parent != root()) ? nodes_[*n.parent].id : std::string{};
      s.level = n.level;
      s.shares = n.shares;
      s.limit = n.limit;
      s.untagged_default = (i == default_node_);
      spec.nodes.push_back(std::move(s));
    }
    return spec;
  }

 private:
  friend ResourcePlan build_plan(const PlanSpec& spec);

  std::vector<HierarchyNode> nodes_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  std::vector<NodeIndex> leaves_;
  NodeIndex default_leaf_ = 0;
  NodeIndex default_node_ = 0;
  int leaf_level_ = Level::workload().rank();
  Objective objective_ = Objective::Auto;
  std::uint64_t version_ = 1;
};

/// Validate a declarative plan and materialize it, adding the implicit
/// "default" children that carry traffic for nodes above the leaf level.
inline ResourcePlan build_plan(const PlanSpec& spec) {
  const std::size_t n = spec.nodes.size();
  std::unordered_map<std::string, std::size_t> decl;
  int leaf_level = Level::workload().rank();
  std::size_t defaults = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spec.nodes[i];
    if (s.id.empty()) throw Error(Errc::MalformedHierarchy, "node with empty id");
    if (!decl.emplace(s.id, i).second)
      throw Error(Errc::MalformedHierarchy, "duplicate node '" + s.id + "'");
    if (s.shares < 1 || s.shares > UINT32_MAX)
      throw Error(Errc::InvalidDirective, "node '" + s.id + "' shares must be >= 1");
    if (s.limit && !(*s.limit > 0.0 && *s.limit <= 1.0))
      throw Error(Errc::InvalidDirective, "node '" + s.id + "' limit must be in (0, 1]");
    if (s.level.rank() < 1)
      throw Error(Errc::MalformedHierarchy, "node '" + s.id + "' has a non-positive level");
    leaf_level = std::max(leaf_level, s.level.rank());
    if (s.untagged_default) ++defaults;
  }
  if (defaults > 1) throw Error(Errc::InvalidDirective, "more than one untagged-default node");
  if (defaults == 0) throw Error(Errc::MissingDefault, "no node is flagged as the untagged default");

  constexpr std::size_t kRoot = SIZE_MAX;
  std::vector<std::size_t> parent(n, kRoot);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spec.nodes[i];
    if (s.parent.empty()) continue;
    auto it = decl.find(s.parent);
    if (it == decl.end())
      throw Error(Errc::MalformedHierarchy, "node '" + s.id + "' has unknown parent '" + s.parent + "'");
    parent[i] = it->second;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i;
    for (std::size_t steps = 0; parent[cur] != kRoot; ++steps) {
      cur = parent[cur];
      if (cur == i || steps > n)
        throw Error(Errc::MalformedHierarchy, "cycle through node '" + spec.nodes[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    int parent_rank = parent[i] == kRoot ? 0 : spec.nodes[parent[i]].level.rank();
    if (spec.nodes[i].level.rank() != parent_rank + 1)
      throw Error(Errc::MalformedHierarchy,
                  "node '" + spec.nodes[i].id + "' at level " + spec.nodes[i].level.name() +
                      " cannot sit under a level-" + std::to_string(parent_rank) + " parent");
  }

  std::vector<std::vector<std::size_t>> kids(n);
  std::vector<std::size_t> tops;
  for (std::size_t i = 0; i < n; ++i) (parent[i] == kRoot ? tops : kids[parent[i]]).push_back(i);

  ResourcePlan plan;
  plan.objective_ = spec.objective;
  plan.version_ = spec.version;
  plan.leaf_level_ = leaf_level;
  plan.nodes_.push_back(HierarchyNode{"", Level::root(), std::nullopt, {}, 1, std::nullopt, false});

  std::optional<NodeIndex> flagged;
  auto add = [&](auto&& self, std::size_t decl_index, NodeIndex parent_index) -> void {
    const auto& s = spec.nodes[decl_index];
    NodeIndex me = plan.nodes_.size();
    plan.nodes_.push_back(HierarchyNode{s.id, s.level, parent_index, {}, static_cast<std::uint32_t>(s.shares),
                                        s.limit, false});
    plan.nodes_[parent_index].children.push_back(me);
    if (s.untagged_default) flagged = me;
    for (auto c : kids[decl_index]) self(self, c, me);
    if (kids[decl_index].empty()) {
      NodeIndex cur = me;
      for (int rank = s.level.rank() + 1; rank <= leaf_level; ++rank) {
        NodeIndex child = plan.nodes_.size();
        plan.nodes_.push_back(HierarchyNode{plan.nodes_[cur].id + "/default", Level{rank}, cur, {}, 1,
                                            std::nullopt, true});
        plan.nodes_[cur].children.push_back(child);
        cur = child;
      }
    }
  };
  for (auto t : tops) add(add, t, ResourcePlan::root());

  for (NodeIndex i = 0; i < plan.nodes_.size(); ++i) {
    if (!plan.by_id_.emplace(plan.nodes_[i].id, i).second)
      throw Error(Errc::MalformedHierarchy, "implicit node collides with '" + plan.nodes_[i].id + "'");
    if (i != ResourcePlan::root() && plan.nodes_[i].children.empty()) plan.leaves_.push_back(i);
  }

  plan.default_node_ = *flagged;
  auto leaf = plan.resolve_leaf(*flagged);
  if (!leaf)
    throw Error(Errc::MissingDefault,
                "untagged-default node '" + plan.nodes_[*flagged].id + "' does not resolve to a leaf");
  plan.default_leaf_ = *leaf;
  return plan;
}

namespace detail {

// Exact rational product of per-level share proportions, falling back to
// floating point if the integers would overflow.
inline double share_path_product(const ResourcePlan& plan, NodeIndex i) {
  unsigned __int128 num = 1, den = 1;
  bool exact = true;
  double approx = 1.0;
  for (auto a : plan.path_to(i)) {
    const auto& parent = plan.node(*plan.node(a).parent);
    std::uint64_t total = 0;
    for (auto s : parent.children) total += plan.node(s).shares;
    std::uint64_t mine = plan.node(a).shares;
    approx *= static_cast<double>(mine) / static_cast<double>(total);
    if (exact) {
      num *= mine;
      den *= total;
      unsigned __int128 g = num, r = den;
      while (r != 0) {
        auto t = g % r;
        g = r;
        r = t;
      }
      num /= g;
      den /= g;
      if (den >> 53) exact = false;
    }
  }
  if (!exact) return approx;
  return static_cast<double>(static_cast<std::uint64_t>(num)) / static_cast<double>(static_cast<std::uint64_t>(den));
}

}  // namespace detail

/// Composed entitlement of `id`: product of sibling share proportions on the
/// path, and the multiplicative limit cascade.
inline EffectiveAllocation effective_allocation(const ResourcePlan& plan, std::string_view id) {
  NodeIndex i = plan.index_of(id);
  EffectiveAllocation out;
  out.id = std::string(id);
  if (i == ResourcePlan::root()) return out;
  out.share_fraction = detail::share_path_product(plan, i);
  for (auto a : plan.path_to(i)) {
    if (const auto& lim = plan.node(a).limit) {
      out.effective_limit *= *lim;
      out.limited = true;
    }
  }
  return out;
}

/// Each child's share of its parent, in declaration order.
inline std::vector<std::pair<std::string, double>> sibling_share_fractions(const ResourcePlan& plan,
                                                                           std::string_view parent) {
  const auto& p = plan.node(plan.index_of(parent));
  std::uint64_t total = 0;
  for (auto c : p.children) total += plan.node(c).shares;
  std::vector<std::pair<std::string, double>> out;
  out.reserve(p.children.size());
  for (auto c : p.children)
    out.emplace_back(plan.node(c).id, static_cast<double>(plan.node(c).shares) / static_cast<double>(total));
  return out;
}

/// Single-writer, many-reader publication point for plan snapshots. A
/// published plan becomes current only when the owner calls apply_pending(),
/// which the simulator does at quantum boundaries.
class PlanHandle {
 public:
  explicit PlanHandle(std::shared_ptr<const ResourcePlan> initial) : current_(std::move(initial)) {}

  std::shared_ptr<const ResourcePlan> current() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  bool has_pending() const {
    std::lock_guard lock(mu_);
    return pending_ != nullptr;
  }

  void publish(std::shared_ptr<const ResourcePlan> next) {
    std::lock_guard lock(mu_);
    std::uint64_t newest = pending_ ? pending_->version() : current_->version();
    if (next->version() <= newest)
      throw Error(Errc::StalePlan, "plan version " + std::to_string(next->version()) +
                                       " does not advance past " + std::to_string(newest));
    pending_ = std::move(next);
  }

  /// Returns true if a pending plan was installed.
  bool apply_pending() {
    std::lock_guard lock(mu_);
    if (!pending_) return false;
    current_ = std::move(pending_);
    pending_.reset();
    return true;
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const ResourcePlan> current_;
  std::shared_ptr<const ResourcePlan> pending_;
};

inline PlanHandle& swap_plan(PlanHandle& handle, std::shared_ptr<const ResourcePlan> next) {
  handle.publish(std::move(next));
  return handle;
}

}  // namespace iorm
