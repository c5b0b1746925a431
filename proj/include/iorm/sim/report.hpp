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

// Report files. Everything is rendered from a RunReport with fixed
// formatting so identical runs give identical bytes.

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "iorm/error.hpp"
#include "iorm/sim/metrics.hpp"

namespace iorm {

/// Leaves that saw any traffic in the measurement window.
inline std::vector<std::string> active_entities(const RunReport& rep) {
  std::vector<std::string> out;
  for (const auto& [id, m] : rep.entities)
    if (m.ops > 0 || m.promoted > 0) out.push_back(id);
  return out;
}

inline std::string render_summary(const RunReport& rep) {
  std::string s;
  s += fmt::format("# scenario {} variant {} scheduler {} seed {}\n", rep.scenario, rep.variant, rep.scheduler, rep.seed);
  s += fmt::format("# window {:.3f}-{:.3f} s, final mode {}, generated {}, completed {}\n", rep.warmup_s,
                   rep.duration_s, rep.final_mode, rep.generated, rep.completed);
  s += fmt::format("{:<32} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>9} {:>8}\n", "entity", "ops/s", "MB/s",
                   "mean_ms", "sd_ms", "queue_ms", "budget", "util%", "promoted", "hit%");
  for (const auto& id : active_entities(rep)) {
    const auto& m = rep.entities.at(id);
    double budget = 1.0;
    if (auto it = rep.node_info.find(id); it != rep.node_info.end()) budget = it->second.effective_limit;
    auto lookups = m.cache_hits + m.cache_misses;
    s += fmt::format("{:<32} {:>10.1f} {:>10.2f} {:>10.3f} {:>10.3f} {:>10.3f} {:>10.5f} {:>8.3f} {:>9} {:>8}\n", id,
                     rep.ops_per_s(id), rep.mb_per_s(id), m.latency_us.mean / 1000.0, m.latency_us.stddev() / 1000.0,
                     m.queue_us.mean / 1000.0, budget, 100.0 * rep.utilization_of(id), m.promoted,
                     lookups ? fmt::format("{:.2f}", 100.0 * static_cast<double>(m.cache_hits) / static_cast<double>(lookups))
                             : std::string("-"));
  }
  return s;
}

inline std::string render_histogram(const RunReport& rep) {
  std::string s = fmt::format("{:<32}", "entity");
  for (auto l : kHistogramLabels) s += fmt::format(" {:>10}", l);
  s += fmt::format(" {:>10}\n", "total");
  for (const auto& id : active_entities(rep)) {
    const auto& h = rep.entities.at(id).histogram;
    s += fmt::format("{:<32}", id);
    for (auto c : h.counts) s += fmt::format(" {:>10}", c);
    s += fmt::format(" {:>10}\n", h.total());
    s += fmt::format("{:<32}", "");
    for (std::size_t b = 0; b < h.counts.size(); ++b) s += fmt::format(" {:>9.3f}%", 100.0 * h.fraction(b));
    s += "\n";
  }
  return s;
}

inline std::string render_utilization(const RunReport& rep) {
  std::string s = "# measurement window\n";
  s += fmt::format("{:<32} {:>8} {:>12} {:>10} {:>16} {:>10}\n", "node", "limited", "budget", "util%",
                   "quanta_throttled", "max_carry");
  for (const auto& id : rep.node_order) {
    auto it = rep.utilization.find(id);
    if (it == rep.utilization.end()) continue;
    const auto& u = it->second;
    s += fmt::format("{:<32} {:>8} {:>12.7f} {:>10.4f} {:>9}/{:<6} {:>10.5f}\n", id, u.limited ? "yes" : "no",
                     u.effective_budget, 100.0 * u.utilization(), u.quanta_throttled, u.quanta, u.max_abs_carry);
  }
  s += "# intervals\n";
  s += fmt::format("{:>9} {:>9} {:<32} {:>10} {:>12} {:>9} {:>9} {:>6}\n", "start_s", "end_s", "node", "util%",
                   "budget", "throttled", "carry", "thr_q");
  for (const auto& r : rep.intervals) {
    if (r.entity.empty()) continue;
    s += fmt::format("{:>9.3f} {:>9.3f} {:<32} {:>10.4f} {:>12.7f} {:>9} {:>9.5f} {:>6}\n", to_seconds(r.start),
                     to_seconds(r.end), r.entity, 100.0 * r.utilization, r.effective_budget, r.throttled ? "yes" : "no",
                     r.carry, r.quanta_throttled);
  }
  return s;
}

inline nlohmann::json to_json(const RunReport& rep) {
  using nlohmann::json;
  json j;
  j["scenario"] = rep.scenario;
  j["variant"] = rep.variant;
  j["scheduler"] = rep.scheduler;
  j["seed"] = rep.seed;
  j["duration_s"] = rep.duration_s;
  j["warmup_s"] = rep.warmup_s;
  j["window_s"] = rep.window_s();
  j["final_mode"] = rep.final_mode;
  j["modes"] = rep.modes;
  j["counters"] = {{"generated", rep.generated}, {"completed", rep.completed}, {"in_flight", rep.in_flight},
                   {"queued", rep.queued},       {"starved", rep.starved},     {"promotions", rep.promotions},
                   {"lottery_draws", rep.lottery_draws}, {"events", rep.events}};
  json ents = json::object();
  for (const auto& [id, m] : rep.entities) {
    ents[id] = {{"ops", m.ops},
                {"bytes", m.bytes},
                {"reads", m.reads},
                {"writes", m.writes},
                {"ops_per_s", rep.ops_per_s(id)},
                {"mb_per_s", rep.mb_per_s(id)},
                {"latency_mean_us", m.latency_us.mean},
                {"latency_stddev_us", m.latency_us.stddev()},
                {"latency_max_us", m.latency_us.max},
                {"queue_mean_us", m.queue_us.mean},
                {"queue_max_us", m.queue_us.max},
                {"histogram", m.histogram.counts},
                {"cache_hits", m.cache_hits},
                {"cache_misses", m.cache_misses},
                {"promoted", m.promoted},
                {"throttled_dispatches", m.throttled_dispatches}};
  }
  j["histogram_buckets"] = kHistogramLabels;
  j["entities"] = std::move(ents);
  json nodes = json::array();
  for (const auto& id : rep.node_order) {
    const auto& info = rep.node_info.at(id);
    json n = {{"id", id},
              {"level", info.level},
              {"shares", info.shares},
              {"share_fraction", info.share_fraction},
              {"effective_limit", info.effective_limit},
              {"limited", info.limited},
              {"implicit", info.implicit},
              {"ops_per_s", rep.ops_per_s(id)},
              {"mb_per_s", rep.mb_per_s(id)}};
    n["limit"] = info.limit ? json(*info.limit) : json(nullptr);
    if (auto it = rep.utilization.find(id); it != rep.utilization.end()) {
      n["utilization"] = it->second.utilization();
      n["quanta"] = it->second.quanta;
      n["quanta_throttled"] = it->second.quanta_throttled;
      n["max_abs_carry"] = it->second.max_abs_carry;
    }
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);
  json iv = json::array();
  for (const auto& r : rep.intervals) {
    if (r.entity.empty()) continue;
    iv.push_back({{"start_s", to_seconds(r.start)},
                  {"end_s", to_seconds(r.end)},
                  {"node", r.entity},
                  {"utilization", r.utilization},
                  {"effective_budget", r.effective_budget},
                  {"throttled", r.throttled},
                  {"carry", r.carry},
                  {"quanta_throttled", r.quanta_throttled}});
  }
  j["intervals"] = std::move(iv);
  json ts = json::array();
  for (const auto& p : rep.timeseries)
    ts.push_back({{"t", p.t}, {"mode", p.mode}, {"promotions", p.promotions}, {"ops", p.ops}, {"bytes", p.bytes}});
  j["timeseries"] = std::move(ts);
  return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
  out << content;
  out.close();
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

/// Write summary.txt, histogram.txt, utilization.txt and metrics.json into `dir`.
inline void emit_reports(const RunReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.txt", render_summary(rep));
  write_file(dir / "histogram.txt", render_histogram(rep));
  write_file(dir / "utilization.txt", render_utilization(rep));
  write_file(dir / "metrics.json", to_json(rep).dump(1) + "\n");
}

}  // namespace iorm
