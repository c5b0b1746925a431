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

// Scenario files (YAML). A file describes one cell, one plan, the tenant
// registry, workload generators and timed events. `variants` lists named
// overrides that are deep-merged over the base document; `extends` names a
// built-in scenario to start from.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iorm/accounting.hpp"
#include "iorm/devices.hpp"
#include "iorm/error.hpp"
#include "iorm/hierarchy.hpp"
#include "iorm/scheduler.hpp"
#include "iorm/sim/workload.hpp"
#include "iorm/tags.hpp"

namespace iorm {

struct CellConfig {
  int hdd = 0;
  int flash = 2;
  unsigned flash_channels = 8;
  HddServiceParams hdd_params;
  FlashServiceParams flash_params;
  DeviceQueueTargets hdd_targets = default_targets(DeviceKind::Hdd);
  DeviceQueueTargets flash_targets = default_targets(DeviceKind::Flash);
  bool write_cache = true;
  std::uint64_t write_cache_bytes = 64 * kMiB;
  double flush_bytes_per_s = 100.0 * kMiB;
  double pressure_threshold = 0.8;
  std::uint64_t cache_bytes = 0;
  bool cache_exclusion = true;
  std::uint64_t stripe_bytes = kMiB;
};

struct EventSpec {
  Duration at{0};
  std::optional<PlanSpec> plan;
  std::optional<bool> cache_available;
  std::optional<bool> cache_exclusion;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  std::string variant = "base";
  std::uint64_t seed = 1;
  Duration duration{60'000'000};
  Duration warmup{0};
  SchedulerKind scheduler = SchedulerKind::Iorm;
  std::optional<Objective> objective_override;  // wins over every plan's objective
  PlanSpec plan;
  ClassificationRegistry registry;
  CellConfig cell;
  AccountingConfig accounting;
  SchedulerConfig sched;
  Duration mode_period{5'000'000};
  Duration deadline_scan{100'000};
  Duration stats_period{1'000'000};
  std::map<std::string, double> cache_quotas;
  std::vector<WorkloadSpec> workloads;
  std::vector<EventSpec> events;
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline void check_keys(const YAML::Node& n, std::initializer_list<std::string_view> allowed, const std::string& path) {
  if (!n.IsMap()) throw ConfigError(path, line_of(n), "expected a mapping");
  for (const auto& kv : n) {
    auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(join(path, key), line_of(kv.first), "unknown field");
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& field, std::string_view expected) {
  if (!n.IsScalar()) throw ConfigError(field, line_of(n), "expected " + std::string(expected));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, line_of(n), "expected " + std::string(expected) + ", got '" + n.Scalar() + "'");
  }
}

inline double number(const YAML::Node& n, const std::string& field) { return scalar<double>(n, field, "a number"); }

inline double non_negative(const YAML::Node& n, const std::string& field) {
  double v = number(n, field);
  if (!(v >= 0) || !std::isfinite(v)) throw ConfigError(field, line_of(n), "must be a non-negative number");
  return v;
}

inline std::int64_t integer(const YAML::Node& n, const std::string& field) {
  return scalar<std::int64_t>(n, field, "an integer");
}

inline bool boolean(const YAML::Node& n, const std::string& field) { return scalar<bool>(n, field, "true or false"); }

inline std::string text(const YAML::Node& n, const std::string& field) {
  return scalar<std::string>(n, field, "a string");
}

/// Accepts a fraction (0.1) or a percentage string ("10%").
inline double fraction(const YAML::Node& n, const std::string& field) {
  auto s = text(n, field);
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    if (used < s.size()) {
      if (s.substr(used) != "%") throw std::invalid_argument(s);
      v /= 100.0;
    }
  } catch (const std::exception&) {
    throw ConfigError(field, line_of(n), "expected a fraction or percentage, got '" + s + "'");
  }
  return v;
}

inline Duration ms(const YAML::Node& n, const std::string& field) {
  return Duration{std::llround(non_negative(n, field) * 1000.0)};
}
inline Duration secs(const YAML::Node& n, const std::string& field) {
  return Duration{std::llround(non_negative(n, field) * 1e6)};
}

/// Maps merge key by key; anything else in `over` replaces `base`.
inline YAML::Node deep_merge(const YAML::Node& base, const YAML::Node& over) {
  if (!base || !base.IsMap() || !over.IsMap()) return YAML::Clone(over);
  YAML::Node out = YAML::Clone(base);
  for (const auto& kv : over) {
    auto key = kv.first.as<std::string>();
    const YAML::Node& view = out;
    if (view[key])
      out[key] = deep_merge(view[key], kv.second);
    else
      out[key] = YAML::Clone(kv.second);
  }
  return out;
}

inline void parse_targets(const YAML::Node& n, DeviceQueueTargets& t, const std::string& path) {
  check_keys(n, {"read_target", "degraded_read_target", "small_read_floor", "large_read_cap", "large_cost",
                 "write_target", "flash_lowprio_target", "raw_queue_limit"},
             path);
  auto field = [&](const char* k, int& out) {
    if (n[k]) {
      auto v = integer(n[k], join(path, k));
      if (v < 0) throw ConfigError(join(path, k), line_of(n[k]), "must be non-negative");
      out = static_cast<int>(v);
    }
  };
  field("read_target", t.read_target);
  t.normal_read_target = t.read_target;
  field("degraded_read_target", t.degraded_read_target);
  field("small_read_floor", t.small_read_floor);
  field("large_read_cap", t.large_read_cap);
  field("large_cost", t.large_cost);
  field("write_target", t.write_target);
  field("flash_lowprio_target", t.flash_lowprio_target);
  field("raw_queue_limit", t.raw_queue_limit);
}

inline CellConfig parse_cell(const YAML::Node& n) {
  CellConfig c;
  if (!n) return c;
  const std::string p = "cell";
  check_keys(n, {"hdd", "flash", "flash_channels", "cache_mb", "cache_exclusion", "stripe_kb", "hdd_service",
                 "flash_service", "write_cache", "hdd_targets", "flash_targets"},
             p);
  if (n["hdd"]) c.hdd = static_cast<int>(integer(n["hdd"], "cell.hdd"));
  if (n["flash"]) c.flash = static_cast<int>(integer(n["flash"], "cell.flash"));
  if (c.hdd < 0 || c.flash < 0 || c.hdd + c.flash == 0)
    throw ConfigError("cell", line_of(n), "need at least one device and no negative counts");
  if (n["flash_channels"]) {
    auto v = integer(n["flash_channels"], "cell.flash_channels");
    if (v < 1) throw ConfigError("cell.flash_channels", line_of(n["flash_channels"]), "must be >= 1");
    c.flash_channels = static_cast<unsigned>(v);
  }
  if (n["cache_mb"]) c.cache_bytes = static_cast<std::uint64_t>(non_negative(n["cache_mb"], "cell.cache_mb") * kMiB);
  if (n["cache_exclusion"]) c.cache_exclusion = boolean(n["cache_exclusion"], "cell.cache_exclusion");
  if (n["stripe_kb"]) {
    c.stripe_bytes = static_cast<std::uint64_t>(non_negative(n["stripe_kb"], "cell.stripe_kb") * kKiB);
    if (c.stripe_bytes < kBlockSize) throw ConfigError("cell.stripe_kb", line_of(n["stripe_kb"]), "must be >= 8");
  }
  if (const auto& h = n["hdd_service"]) {
    check_keys(h, {"random_mean_us", "random_p99_us", "sequential_position_us", "mb_per_s", "cached_write_us"},
               "cell.hdd_service");
    if (h["random_mean_us"]) c.hdd_params.random_mean_us = non_negative(h["random_mean_us"], "cell.hdd_service.random_mean_us");
    if (h["random_p99_us"]) c.hdd_params.random_p99_us = non_negative(h["random_p99_us"], "cell.hdd_service.random_p99_us");
    if (h["sequential_position_us"])
      c.hdd_params.sequential_position_us = non_negative(h["sequential_position_us"], "cell.hdd_service.sequential_position_us");
    if (h["mb_per_s"]) c.hdd_params.bytes_per_us = non_negative(h["mb_per_s"], "cell.hdd_service.mb_per_s") * kMiB / 1e6;
    if (h["cached_write_us"]) c.hdd_params.cached_write_us = non_negative(h["cached_write_us"], "cell.hdd_service.cached_write_us");
    if (!(c.hdd_params.random_p99_us > c.hdd_params.random_mean_us) || !(c.hdd_params.bytes_per_us > 0))
      throw ConfigError("cell.hdd_service", line_of(h), "need p99 > mean and positive bandwidth");
  }
  if (const auto& f = n["flash_service"]) {
    check_keys(f, {"min_us", "max_us", "mb_per_s"}, "cell.flash_service");
    if (f["min_us"]) c.flash_params.min_us = non_negative(f["min_us"], "cell.flash_service.min_us");
    if (f["max_us"]) c.flash_params.max_us = non_negative(f["max_us"], "cell.flash_service.max_us");
    if (f["mb_per_s"]) c.flash_params.bytes_per_us = non_negative(f["mb_per_s"], "cell.flash_service.mb_per_s") * kMiB / 1e6;
    if (!(c.flash_params.max_us > c.flash_params.min_us) || !(c.flash_params.bytes_per_us > 0))
      throw ConfigError("cell.flash_service", line_of(f), "need max > min and positive bandwidth");
  }
  if (const auto& w = n["write_cache"]) {
    if (w.IsScalar()) {
      c.write_cache = boolean(w, "cell.write_cache");
    } else {
      check_keys(w, {"capacity_mb", "flush_mb_per_s", "pressure_threshold"}, "cell.write_cache");
      if (w["capacity_mb"])
        c.write_cache_bytes = static_cast<std::uint64_t>(non_negative(w["capacity_mb"], "cell.write_cache.capacity_mb") * kMiB);
      if (w["flush_mb_per_s"])
        c.flush_bytes_per_s = non_negative(w["flush_mb_per_s"], "cell.write_cache.flush_mb_per_s") * kMiB;
      if (w["pressure_threshold"])
        c.pressure_threshold = fraction(w["pressure_threshold"], "cell.write_cache.pressure_threshold");
    }
  }
  if (n["hdd_targets"]) parse_targets(n["hdd_targets"], c.hdd_targets, "cell.hdd_targets");
  if (n["flash_targets"]) parse_targets(n["flash_targets"], c.flash_targets, "cell.flash_targets");
  return c;
}

inline void parse_nodes(const YAML::Node& n, const std::string& parent, int depth, std::vector<NodeSpec>& out,
                        const std::string& path) {
  if (!n.IsMap()) throw ConfigError(path, line_of(n), "expected a mapping of node names");
  for (const auto& kv : n) {
    auto name = kv.first.as<std::string>();
    if (name.empty() || name.find('/') != std::string::npos)
      throw ConfigError(join(path, name), line_of(kv.first), "node names must be non-empty and contain no '/'");
    const std::string here = join(path, name);
    NodeSpec s;
    s.id = parent.empty() ? name : parent + "/" + name;
    s.parent = parent;
    s.level = Level{depth};
    const YAML::Node& body = kv.second;
    if (body.IsNull()) {
      out.push_back(s);
      continue;
    }
    check_keys(body, {"shares", "limit", "default", "children"}, here);
    if (body["shares"]) s.shares = integer(body["shares"], join(here, "shares"));
    if (body["limit"]) s.limit = fraction(body["limit"], join(here, "limit"));
    if (body["default"]) s.untagged_default = boolean(body["default"], join(here, "default"));
    if (s.shares < 1) throw ConfigError(join(here, "shares"), line_of(body["shares"]), "must be >= 1");
    if (s.limit && !(*s.limit > 0 && *s.limit <= 1))
      throw ConfigError(join(here, "limit"), line_of(body["limit"]), "must be in (0, 100%]");
    out.push_back(s);
    if (body["children"]) parse_nodes(body["children"], s.id, depth + 1, out, join(here, "children"));
  }
}

inline PlanSpec parse_plan(const YAML::Node& n, std::uint64_t version) {
  if (!n) throw ConfigError("plan", 0, "missing");
  check_keys(n, {"objective", "nodes"}, "plan");
  PlanSpec spec;
  spec.version = version;
  if (n["objective"]) {
    auto o = parse_objective(text(n["objective"], "plan.objective"));
    if (!o) throw ConfigError("plan.objective", line_of(n["objective"]), "unknown objective");
    spec.objective = *o;
  }
  if (!n["nodes"]) throw ConfigError("plan.nodes", line_of(n), "missing");
  parse_nodes(n["nodes"], "", 1, spec.nodes, "plan.nodes");
  try {
    (void)build_plan(spec);
  } catch (const Error& e) {
    throw ConfigError("plan", line_of(n), e.what());
  }
  return spec;
}

inline ClassificationRegistry parse_registry(const YAML::Node& n) {
  ClassificationRegistry r;
  if (!n) return r;
  if (!n.IsSequence()) throw ConfigError("tenants", line_of(n), "expected a list");
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto& t = n[i];
    const std::string p = "tenants[" + std::to_string(i) + "]";
    check_keys(t, {"database_id", "node", "workloads"}, p);
    if (!t["database_id"] || !t["node"]) throw ConfigError(p, line_of(t), "needs database_id and node");
    auto id = integer(t["database_id"], join(p, "database_id"));
    if (id <= 0 || id > UINT32_MAX) throw ConfigError(join(p, "database_id"), line_of(t["database_id"]), "out of range");
    TenantEntry e;
    e.node = text(t["node"], join(p, "node"));
    if (const auto& w = t["workloads"]) {
      if (!w.IsMap()) throw ConfigError(join(p, "workloads"), line_of(w), "expected key: leaf mapping");
      for (const auto& kv : w) {
        auto key = integer(kv.first, join(p, "workloads"));
        if (key <= 0 || key > UINT32_MAX) throw ConfigError(join(p, "workloads"), line_of(kv.first), "bad workload key");
        e.workloads[static_cast<std::uint32_t>(key)] = text(kv.second, join(p, "workloads"));
      }
    }
    if (!r.tenants.emplace(static_cast<std::uint32_t>(id), std::move(e)).second)
      throw ConfigError(join(p, "database_id"), line_of(t["database_id"]), "duplicate tenant");
  }
  return r;
}

inline WorkloadSpec parse_workload(const std::string& name, const YAML::Node& n) {
  const std::string p = "workloads." + name;
  check_keys(n, {"enabled", "database_id", "workload_key", "pattern", "priority", "category", "arrival", "sessions",
                 "think_ms", "rate", "phase_ms", "size_kb", "size_bytes", "working_set_mb", "write_fraction", "start_s",
                 "stop_s", "prewarm"},
             p);
  WorkloadSpec w;
  w.name = name;
  if (n["enabled"]) w.enabled = boolean(n["enabled"], join(p, "enabled"));
  if (!n["database_id"]) throw ConfigError(join(p, "database_id"), line_of(n), "missing");
  w.database_id = static_cast<std::uint32_t>(integer(n["database_id"], join(p, "database_id")));
  if (n["workload_key"]) w.workload_key = static_cast<std::uint32_t>(integer(n["workload_key"], join(p, "workload_key")));
  if (n["pattern"]) {
    auto pat = parse_pattern(text(n["pattern"], join(p, "pattern")));
    if (!pat) throw ConfigError(join(p, "pattern"), line_of(n["pattern"]), "unknown pattern");
    w.pattern = *pat;
  }
  if (n["priority"]) {
    auto pr = parse_priority(text(n["priority"], join(p, "priority")));
    if (!pr) throw ConfigError(join(p, "priority"), line_of(n["priority"]), "expected high, medium or low");
    w.priority = *pr;
  }
  if (n["category"]) {
    auto c = parse_category(text(n["category"], join(p, "category")));
    if (!c) throw ConfigError(join(p, "category"), line_of(n["category"]), "unknown category");
    w.category = *c;
  }
  if (n["arrival"]) {
    auto a = parse_arrival(text(n["arrival"], join(p, "arrival")));
    if (!a) throw ConfigError(join(p, "arrival"), line_of(n["arrival"]), "expected closed, poisson or periodic");
    w.arrival = *a;
  }
  if (n["sessions"]) w.sessions = static_cast<int>(integer(n["sessions"], join(p, "sessions")));
  if (n["think_ms"]) w.think = ms(n["think_ms"], join(p, "think_ms"));
  if (n["rate"]) w.rate = non_negative(n["rate"], join(p, "rate"));
  if (n["phase_ms"]) w.phase = ms(n["phase_ms"], join(p, "phase_ms"));
  if (n["size_kb"]) w.size = static_cast<std::uint64_t>(non_negative(n["size_kb"], join(p, "size_kb")) * kKiB);
  if (n["size_bytes"]) w.size = static_cast<std::uint64_t>(integer(n["size_bytes"], join(p, "size_bytes")));
  if (n["working_set_mb"])
    w.working_set = static_cast<std::uint64_t>(non_negative(n["working_set_mb"], join(p, "working_set_mb")) * kMiB);
  if (n["write_fraction"]) w.write_fraction = fraction(n["write_fraction"], join(p, "write_fraction"));
  if (n["start_s"]) w.start = secs(n["start_s"], join(p, "start_s"));
  if (n["stop_s"]) w.stop = secs(n["stop_s"], join(p, "stop_s"));
  if (n["prewarm"]) w.prewarm = boolean(n["prewarm"], join(p, "prewarm"));

  if (w.arrival == Arrival::Closed && w.sessions < 1) throw ConfigError(join(p, "sessions"), line_of(n), "must be >= 1");
  if (w.arrival != Arrival::Closed && !(w.rate > 0)) throw ConfigError(join(p, "rate"), line_of(n), "open-loop needs rate > 0");
  if (w.write_fraction < 0 || w.write_fraction > 1)
    throw ConfigError(join(p, "write_fraction"), line_of(n["write_fraction"]), "must be in [0, 1]");
  if (n["size_kb"] || n["size_bytes"])
    if (w.size == 0) throw ConfigError(join(p, "size"), line_of(n), "must be positive");
  return w;
}

}  // namespace detail

/// A parsed scenario document before a variant is chosen.
struct ScenarioSource {
  std::string name;
  YAML::Node root;
  std::vector<std::string> variants;  // empty: only "base"
};

using ScenarioResolver = std::function<std::optional<std::string>(std::string_view name)>;

inline ScenarioSource parse_scenario_text(std::string_view text, const ScenarioResolver& resolve = {}, int depth = 0) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("yaml", e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg);
  }
  if (!root.IsMap()) throw ConfigError("", detail::line_of(root), "scenario must be a mapping");
  if (const auto& ext = root["extends"]) {
    auto base_name = detail::text(ext, "extends");
    std::optional<std::string> base_text = resolve ? resolve(base_name) : std::nullopt;
    if (!base_text) throw ConfigError("extends", detail::line_of(ext), "unknown scenario '" + base_name + "'");
    if (depth > 8) throw ConfigError("extends", detail::line_of(ext), "extends chain too deep");
    auto base = parse_scenario_text(*base_text, resolve, depth + 1);
    YAML::Node own = YAML::Clone(root);
    own.remove("extends");
    // A derived scenario brings its own variants and events, if any.
    YAML::Node merged = base.root;
    if (own["variants"]) merged.remove("variants");
    if (own["events"]) merged.remove("events");
    root.reset(detail::deep_merge(merged, own));
  }
  ScenarioSource src;
  src.root = root;
  src.name = root["name"] ? detail::text(root["name"], "name") : std::string("unnamed");
  if (const auto& v = root["variants"]) {
    if (!v.IsSequence()) throw ConfigError("variants", detail::line_of(v), "expected a list");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "variants[" + std::to_string(i) + "]";
      detail::check_keys(v[i], {"name", "overrides"}, p);
      if (!v[i]["name"]) throw ConfigError(p, detail::line_of(v[i]), "variant needs a name");
      auto name = detail::text(v[i]["name"], p + ".name");
      if (std::find(src.variants.begin(), src.variants.end(), name) != src.variants.end())
        throw ConfigError(p + ".name", detail::line_of(v[i]["name"]), "duplicate variant");
      src.variants.push_back(name);
    }
  }
  return src;
}

/// Resolve one variant ("base" or "" for the document as written).
inline ScenarioConfig load_variant(const ScenarioSource& src, std::string_view variant = {}) {
  using namespace detail;
  // Handles alias: rebind with reset() so the shared source is never rewritten.
  YAML::Node doc = src.root;
  std::string vname = variant.empty() ? "base" : std::string(variant);
  if (vname != "base" || !src.variants.empty()) {
    if (variant.empty()) vname = src.variants.front();
    bool found = false;
    const auto& list = src.root["variants"];
    for (std::size_t i = 0; list && i < list.size(); ++i) {
      if (list[i]["name"].as<std::string>() != vname) continue;
      found = true;
      if (const auto& o = list[i]["overrides"]) {
        if (!o.IsMap()) throw ConfigError("variants[" + std::to_string(i) + "].overrides", line_of(o), "expected a mapping");
        doc.reset(deep_merge(doc, o));
      }
    }
    if (!found && vname != "base") throw ConfigError("variant", 0, "unknown variant '" + vname + "'");
  }

  check_keys(doc, {"name", "description", "seed", "duration_s", "warmup_s", "scheduler", "cell", "accounting",
                   "scheduling", "plan", "tenants", "cache_quotas", "workloads", "variants", "events"},
             "");
  ScenarioConfig c;
  c.name = src.name;
  c.variant = vname;
  if (doc["description"]) c.description = text(doc["description"], "description");
  if (doc["seed"]) c.seed = static_cast<std::uint64_t>(integer(doc["seed"], "seed"));
  if (doc["duration_s"]) c.duration = secs(doc["duration_s"], "duration_s");
  if (doc["warmup_s"]) c.warmup = secs(doc["warmup_s"], "warmup_s");
  if (c.warmup > c.duration) c.warmup = c.duration;
  if (doc["scheduler"]) {
    auto s = text(doc["scheduler"], "scheduler");
    if (s != "iorm" && s != "bypass") throw ConfigError("scheduler", line_of(doc["scheduler"]), "expected iorm or bypass");
    c.scheduler = s == "iorm" ? SchedulerKind::Iorm : SchedulerKind::Bypass;
  }
  c.sched.kind = c.scheduler;
  c.cell = parse_cell(doc["cell"]);
  if (const auto& a = doc["accounting"]) {
    check_keys(a, {"quantum_ms", "quanta_per_interval", "clamp"}, "accounting");
    if (a["quantum_ms"]) c.accounting.quantum = ms(a["quantum_ms"], "accounting.quantum_ms");
    if (a["quanta_per_interval"])
      c.accounting.quanta_per_interval = static_cast<int>(integer(a["quanta_per_interval"], "accounting.quanta_per_interval"));
    if (a["clamp"]) c.accounting.clamp = fraction(a["clamp"], "accounting.clamp");
    if (c.accounting.quantum.count() <= 0 || c.accounting.quanta_per_interval <= 0)
      throw ConfigError("accounting", line_of(a), "periods must be positive");
  }
  if (const auto& s = doc["scheduling"]) {
    check_keys(s, {"deadline_ms", "fragment_kb", "mode_period_s", "deadline_scan_ms", "stats_period_s",
                   "latency_low_concurrency"},
               "scheduling");
    if (s["deadline_ms"]) c.sched.deadline_threshold = ms(s["deadline_ms"], "scheduling.deadline_ms");
    if (s["fragment_kb"])
      c.sched.fragment_size = static_cast<std::uint64_t>(non_negative(s["fragment_kb"], "scheduling.fragment_kb") * kKiB);
    if (s["mode_period_s"]) c.mode_period = secs(s["mode_period_s"], "scheduling.mode_period_s");
    if (s["deadline_scan_ms"]) c.deadline_scan = ms(s["deadline_scan_ms"], "scheduling.deadline_scan_ms");
    if (s["stats_period_s"]) c.stats_period = secs(s["stats_period_s"], "scheduling.stats_period_s");
    if (s["latency_low_concurrency"])
      c.sched.latency_low_concurrency = static_cast<int>(integer(s["latency_low_concurrency"], "scheduling.latency_low_concurrency"));
    if (c.sched.fragment_size == 0 || c.mode_period.count() <= 0 || c.deadline_scan.count() <= 0 ||
        c.stats_period.count() <= 0)
      throw ConfigError("scheduling", line_of(s), "sizes and periods must be positive");
  }
  c.plan = parse_plan(doc["plan"], 1);
  c.registry = parse_registry(doc["tenants"]);
  if (const auto& q = doc["cache_quotas"]) {
    if (!q.IsMap()) throw ConfigError("cache_quotas", line_of(q), "expected leaf: fraction mapping");
    for (const auto& kv : q) {
      auto leaf = kv.first.as<std::string>();
      double f = fraction(kv.second, "cache_quotas." + leaf);
      if (f < 0 || f > 1) throw ConfigError("cache_quotas." + leaf, line_of(kv.second), "must be in [0, 100%]");
      c.cache_quotas[leaf] = f;
    }
  }
  if (const auto& w = doc["workloads"]) {
    if (!w.IsMap()) throw ConfigError("workloads", line_of(w), "expected a mapping of generators");
    for (const auto& kv : w) c.workloads.push_back(parse_workload(kv.first.as<std::string>(), kv.second));
  }
  if (const auto& ev = doc["events"]) {
    if (!ev.IsSequence()) throw ConfigError("events", line_of(ev), "expected a list");
    YAML::Node plan_doc = doc["plan"];
    std::uint64_t version = 1;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const std::string p = "events[" + std::to_string(i) + "]";
      check_keys(ev[i], {"at_s", "swap_plan", "cache_available", "cache_exclusion"}, p);
      if (!ev[i]["at_s"]) throw ConfigError(p + ".at_s", line_of(ev[i]), "missing");
      EventSpec e;
      e.at = secs(ev[i]["at_s"], p + ".at_s");
      if (!c.events.empty() && e.at < c.events.back().at)
        throw ConfigError(p + ".at_s", line_of(ev[i]["at_s"]), "events must be listed in time order");
      if (const auto& sp = ev[i]["swap_plan"]) {
        plan_doc.reset(deep_merge(plan_doc, sp));
        e.plan = parse_plan(plan_doc, ++version);
      }
      if (ev[i]["cache_available"]) e.cache_available = boolean(ev[i]["cache_available"], p + ".cache_available");
      if (ev[i]["cache_exclusion"]) e.cache_exclusion = boolean(ev[i]["cache_exclusion"], p + ".cache_exclusion");
      c.events.push_back(std::move(e));
    }
  }
  return c;
}

}  // namespace iorm
