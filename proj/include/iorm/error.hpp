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

#include <stdexcept>
#include <string>
#include <string_view>

namespace iorm {

enum class Errc {
  MalformedHierarchy,
  InvalidDirective,
  MissingDefault,
  UnknownNode,
  StalePlan,
  TruncatedTag,
  UnknownVersion,
  MalformedTag,
  DoubleCompletion,
  InfeasibleTarget,
  ConfigError,
  IoError,
  InvariantViolation,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHierarchy: return "MalformedHierarchy";
    case Errc::InvalidDirective: return "InvalidDirective";
    case Errc::MissingDefault: return "MissingDefault";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::StalePlan: return "StalePlan";
    case Errc::TruncatedTag: return "TruncatedTag";
    case Errc::UnknownVersion: return "UnknownVersion";
    case Errc::MalformedTag: return "MalformedTag";
    case Errc::DoubleCompletion: return "DoubleCompletion";
    case Errc::InfeasibleTarget: return "InfeasibleTarget";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Configuration problems, with the offending field and (when known) the
/// 1-based source line.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, int line, const std::string& what)
      : Error(Errc::ConfigError, format(field, line, what)),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field, int line, const std::string& what) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + what;
  }

  std::string field_;
  int line_;
};

}  // namespace iorm
