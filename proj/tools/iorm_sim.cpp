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

// Command-line front end for the cell simulator.
//
//   iorm-sim run <scenario> --seed N --out DIR [--scheduler iorm|bypass]
//            [--objective auto|low-latency|high-throughput|balanced]
//            [--variant NAME] [--duration S] [--trace]
//   iorm-sim list-scenarios
//   iorm-sim show-scenario <name>
//   iorm-sim compare <runA> <runB>
//
// Exit codes: 0 success, 2 configuration error, 3 invariant violation.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "iorm/sim/catalog.hpp"
#include "iorm/sim/cell.hpp"
#include "iorm/sim/compare.hpp"
#include "iorm/sim/report.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kInvariantExit = 3;

struct RunOptions {
  std::string scenario;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out = "out";
  std::string scheduler;
  std::string objective;
  std::string variant;
  std::optional<double> duration;
  bool trace = false;
};

int do_run(const RunOptions& o) {
  auto src = iorm::load_scenario(o.scenario);
  std::vector<std::string> variants;
  if (!o.variant.empty())
    variants.push_back(o.variant);
  else if (src.variants.empty())
    variants.push_back("base");
  else
    variants = src.variants;

  for (const auto& v : variants) {
    auto cfg = iorm::load_variant(src, v);
    if (!o.scheduler.empty()) {
      if (o.scheduler != "iorm" && o.scheduler != "bypass")
        throw iorm::ConfigError("--scheduler", 0, "expected iorm or bypass");
      cfg.scheduler = o.scheduler == "iorm" ? iorm::SchedulerKind::Iorm : iorm::SchedulerKind::Bypass;
      cfg.sched.kind = cfg.scheduler;
    }
    if (!o.objective.empty()) {
      auto obj = iorm::parse_objective(o.objective);
      if (!obj) throw iorm::ConfigError("--objective", 0, "unknown objective '" + o.objective + "'");
      cfg.objective_override = *obj;
    }
    if (o.duration) {
      cfg.duration = iorm::from_seconds(*o.duration);
      if (cfg.warmup > cfg.duration) cfg.warmup = cfg.duration;
    }
    const std::filesystem::path dir = std::filesystem::path(o.out) / v;
    std::filesystem::create_directories(dir);
    std::ofstream trace;
    if (o.trace) {
      trace.open(dir / "trace.log", std::ios::binary | std::ios::trunc);
      if (!trace) throw iorm::Error(iorm::Errc::IoError, "cannot open trace log");
    }
    auto rep = iorm::run_scenario(cfg, o.seed_given ? std::optional(o.seed) : std::nullopt, o.trace ? &trace : nullptr);
    iorm::emit_reports(rep, dir);
    fmt::print("{} / {}: {} requests completed, reports in {}\n", cfg.name, v, rep.completed, dir.string());
  }
  return 0;
}

int do_list() {
  for (const auto& b : iorm::builtin_scenarios()) {
    auto src = iorm::parse_scenario_text(b.yaml, iorm::builtin_text);
    std::string desc = src.root["description"] ? src.root["description"].as<std::string>() : "";
    if (auto nl = desc.find('\n'); nl != std::string::npos) desc.resize(nl);
    fmt::print("{:<22} {}\n", b.name, desc);
    if (!src.variants.empty()) {
      std::string vs;
      for (const auto& v : src.variants) vs += (vs.empty() ? "" : ", ") + v;
      fmt::print("{:<22}   variants: {}\n", "", vs);
    }
  }
  return 0;
}

int do_show(const std::string& name) {
  auto text = iorm::builtin_text(name);
  if (!text) throw iorm::ConfigError("scenario", 0, "no built-in scenario named '" + name + "'");
  std::cout << *text;
  return 0;
}

int do_compare(const std::string& a, const std::string& b) {
  std::cout << iorm::render_comparison(iorm::read_metrics(a), iorm::read_metrics(b));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical I/O resource manager cell simulator"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run a scenario file or built-in scenario");
  run->add_option("scenario", ro.scenario, "YAML file or built-in name")->required();
  run->add_option("--seed", ro.seed, "Root random seed (defaults to the scenario's)")
      ->each([&](const std::string&) { ro.seed_given = true; });
  run->add_option("--out", ro.out, "Output directory");
  run->add_option("--scheduler", ro.scheduler, "iorm or bypass");
  run->add_option("--objective", ro.objective, "auto, low-latency, high-throughput or balanced");
  run->add_option("--variant", ro.variant, "Run one variant only");
  run->add_option("--duration", ro.duration, "Override simulated seconds");
  run->add_flag("--trace", ro.trace, "Write trace.log");

  app.add_subcommand("list-scenarios", "List built-in scenarios");
  std::string show_name;
  auto* show = app.add_subcommand("show-scenario", "Print a built-in scenario");
  show->add_option("name", show_name)->required();
  std::string run_a, run_b;
  auto* cmp = app.add_subcommand("compare", "Compare two run directories");
  cmp->add_option("runA", run_a)->required();
  cmp->add_option("runB", run_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  try {
    if (run->parsed()) return do_run(ro);
    if (app.got_subcommand("list-scenarios")) return do_list();
    if (show->parsed()) return do_show(show_name);
    if (cmp->parsed()) return do_compare(run_a, run_b);
  } catch (const iorm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case iorm::Errc::InvariantViolation:
      case iorm::Errc::DoubleCompletion: return kInvariantExit;
      case iorm::Errc::IoError: return 1;
      default: return kConfigExit;
    }
  }
  return 0;
}
