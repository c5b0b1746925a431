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

// Independent replay of an event trace ("t kind id parent entity device").
// Knows nothing about the simulator beyond the line format.

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace iorm::testing {

struct TraceAudit {
  std::uint64_t lines = 0;
  std::uint64_t generated = 0;
  std::uint64_t completed = 0;  // whole requests, all fragments done
  std::uint64_t live = 0;       // generated but not completed at the end
  std::uint64_t dispatched_units = 0;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

inline TraceAudit audit_trace(std::istream& in) {
  struct Unit {
    bool dispatched = false;
    bool completed = false;
  };
  struct Request {
    bool fragmented = false;
    std::set<std::uint64_t> pending;  // fragment ids not yet complete
    bool done = false;
  };
  TraceAudit a;
  std::map<std::uint64_t, Request> reqs;
  std::map<std::uint64_t, std::uint64_t> parent_of;
  std::map<std::uint64_t, Unit> units;
  std::int64_t last_t = -1;
  auto fail = [&](std::uint64_t line, const std::string& what) {
    if (a.errors.size() < 20) a.errors.push_back("line " + std::to_string(line) + ": " + what);
  };

  std::string line;
  while (std::getline(in, line)) {
    ++a.lines;
    std::istringstream ls(line);
    std::int64_t t;
    std::string kind, parent, entity, device;
    std::uint64_t id;
    if (!(ls >> t >> kind >> id >> parent >> entity >> device)) {
      fail(a.lines, "malformed");
      continue;
    }
    if (t < last_t) fail(a.lines, "time went backwards");
    last_t = t;
    const bool piece = parent != "-";
    const std::uint64_t top = piece ? std::stoull(parent) : id;

    if (kind == "gen") {
      if (reqs.count(id)) fail(a.lines, "generated twice");
      reqs[id];
      ++a.generated;
      continue;
    }
    auto r = reqs.find(top);
    if (r == reqs.end()) {
      fail(a.lines, kind + " of a request never generated");
      continue;
    }
    if (kind == "enq" || kind == "promote") continue;
    if (kind == "frag") {
      if (units[top].dispatched) fail(a.lines, "fragmenting a dispatched request");
      r->second.fragmented = true;
      r->second.pending.insert(id);
      parent_of[id] = top;
      continue;
    }
    if (piece && (!parent_of.count(id) || parent_of[id] != top)) fail(a.lines, "unknown fragment");
    if (!piece && r->second.fragmented) fail(a.lines, "fragmented request handled whole");
    auto& u = units[id];
    if (kind == "dispatch") {
      if (u.dispatched) fail(a.lines, "dispatched twice");
      u.dispatched = true;
      ++a.dispatched_units;
    } else if (kind == "complete") {
      if (!u.dispatched) fail(a.lines, "completed before dispatch");
      if (u.completed) fail(a.lines, "completed twice");
      u.completed = true;
      if (piece) r->second.pending.erase(id);
      if (!piece || r->second.pending.empty()) {
        if (r->second.done) fail(a.lines, "request finished twice");
        r->second.done = true;
        ++a.completed;
      }
    } else {
      fail(a.lines, "unknown kind " + kind);
    }
  }
  for (const auto& [id, r] : reqs)
    if (!r.done) ++a.live;
  return a;
}

}  // namespace iorm::testing
