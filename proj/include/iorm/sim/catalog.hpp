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

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iorm/error.hpp"
#include "iorm/sim/scenario.hpp"

namespace iorm {

struct BuiltinScenario {
  std::string_view name;
  std::string_view yaml;
};

/// Scenarios compiled in from scenarios/*.yaml, sorted by name.
inline const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> list = {
#include "iorm/sim/builtin_scenarios.inc"
  };
  return list;
}

inline std::optional<std::string> builtin_text(std::string_view name) {
  for (const auto& s : builtin_scenarios())
    if (s.name == name) return std::string(s.yaml);
  return std::nullopt;
}

/// Parse a built-in scenario.
inline ScenarioSource builtin_scenario(std::string_view name) {
  auto text = builtin_text(name);
  if (!text) throw ConfigError("scenario", 0, "no built-in scenario named '" + std::string(name) + "'");
  return parse_scenario_text(*text, builtin_text);
}

/// A path to a YAML file, or the name of a built-in scenario.
inline ScenarioSource load_scenario(const std::string& name_or_path) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(name_or_path, ec)) {
    std::ifstream in(name_or_path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read " + name_or_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), builtin_text);
  }
  return builtin_scenario(name_or_path);
}

}  // namespace iorm
