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

// Side-by-side view of two finished runs, read back from metrics.json.

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "iorm/error.hpp"

namespace iorm {

inline nlohmann::json read_metrics(const std::filesystem::path& run) {
  auto path = std::filesystem::is_directory(run) ? run / "metrics.json" : run;
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoError, path.string() + ": " + e.what());
  }
}

namespace detail {
inline double pct_change(double a, double b) { return a == 0 ? 0.0 : 100.0 * (b - a) / a; }
inline std::string ratio(double a, double b) { return b == 0 ? std::string("-") : fmt::format("{:.2f}", a / b); }
}  // namespace detail

/// Per-entity throughput change from A to B, and each run's top-level
/// bandwidth ratios against its smallest active node.
inline std::string render_comparison(const nlohmann::json& a, const nlohmann::json& b) {
  std::string s = fmt::format("# A: {} / {} ({})\n# B: {} / {} ({})\n", a.value("scenario", "?"), a.value("variant", "?"),
                              a.value("scheduler", "?"), b.value("scenario", "?"), b.value("variant", "?"),
                              b.value("scheduler", "?"));
  s += fmt::format("{:<32} {:>11} {:>11} {:>9} {:>10} {:>10} {:>12} {:>12}\n", "entity", "A ops/s", "B ops/s", "change%",
                   "A MB/s", "B MB/s", "A mean_ms", "B mean_ms");
  std::set<std::string> ids;
  for (const auto& [id, e] : a["entities"].items())
    if (e.value("ops", 0) > 0) ids.insert(id);
  for (const auto& [id, e] : b["entities"].items())
    if (e.value("ops", 0) > 0) ids.insert(id);
  auto get = [](const nlohmann::json& run, const std::string& id, const char* key) {
    const auto& e = run["entities"];
    return e.contains(id) ? e[id].value(key, 0.0) : 0.0;
  };
  for (const auto& id : ids) {
    double ao = get(a, id, "ops_per_s"), bo = get(b, id, "ops_per_s");
    s += fmt::format("{:<32} {:>11.1f} {:>11.1f} {:>+9.1f} {:>10.2f} {:>10.2f} {:>12.3f} {:>12.3f}\n", id, ao, bo,
                     detail::pct_change(ao, bo), get(a, id, "mb_per_s"), get(b, id, "mb_per_s"),
                     get(a, id, "latency_mean_us") / 1000.0, get(b, id, "latency_mean_us") / 1000.0);
  }
  for (const auto* run : {&a, &b}) {
    s += fmt::format("# bandwidth ratios, run {}\n", run == &a ? "A" : "B");
    double smallest = 0;
    for (const auto& n : (*run)["nodes"])
      if (n.value("level", "") == "cdb" && n.value("mb_per_s", 0.0) > 0)
        smallest = smallest == 0 ? n.value("mb_per_s", 0.0) : std::min(smallest, n.value("mb_per_s", 0.0));
    for (const auto& n : (*run)["nodes"]) {
      if (n.value("level", "") != "cdb" || n.value("mb_per_s", 0.0) <= 0) continue;
      s += fmt::format("{:<32} {:>10.2f} MB/s  ratio {}\n", n.value("id", ""), n.value("mb_per_s", 0.0),
                       detail::ratio(n.value("mb_per_s", 0.0), smallest));
    }
  }
  return s;
}

}  // namespace iorm
