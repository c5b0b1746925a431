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

// Flash cache with tag-driven admission. Eviction is LRU over the whole cache;
// an owner with a quota evicts from its own LRU list first so it never holds
// more than its share.

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iorm/error.hpp"
#include "iorm/tags.hpp"

namespace iorm {

enum class CacheOutcome : std::uint8_t {
  Admitted,
  Bypassed,
  EvictedAndAdmitted,
  AlreadyResident,
  QuotaExhausted,  // owner has a zero quota; the I/O simply bypasses
};

constexpr bool resident_after(CacheOutcome o) noexcept {
  return o == CacheOutcome::Admitted || o == CacheOutcome::EvictedAndAdmitted || o == CacheOutcome::AlreadyResident;
}

struct CacheOwnerStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;  // entries of this owner evicted
  std::uint64_t resident_bytes = 0;

  double hit_rate() const noexcept {
    auto n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
};

class FlashCache {
 public:
  using Predicate = std::function<bool(const Classification&, std::uint64_t block)>;

  explicit FlashCache(std::uint64_t capacity = 0) : capacity_(capacity) {}

  std::uint64_t capacity() const noexcept { return capacity_; }
  std::uint64_t resident_bytes() const noexcept { return used_; }
  std::size_t resident_entries() const noexcept { return entries_.size(); }
  bool exclusion_enabled() const noexcept { return exclusion_; }

  /// When disabled, CacheNo traffic is cached like CacheYes.
  void set_exclusion_enabled(bool enabled) noexcept { exclusion_ = enabled; }

  /// Admission test for CacheConditional traffic (default: admit).
  void set_conditional_predicate(Predicate p) { conditional_ = std::move(p); }

  /// Quota as a fraction of capacity; nullopt removes it.
  void set_quota(const std::string& owner, std::optional<double> fraction) {
    if (fraction && (*fraction < 0 || *fraction > 1)) throw Error(Errc::InvalidDirective, "cache quota outside [0, 1]");
    owners_[owner].quota = fraction;
  }

  std::optional<std::uint64_t> quota_bytes(const std::string& owner) const {
    auto it = owners_.find(owner);
    if (it == owners_.end() || !it->second.quota) return std::nullopt;
    return static_cast<std::uint64_t>(*it->second.quota * static_cast<double>(capacity_));
  }

  bool contains(std::uint64_t block) const { return entries_.count(block) != 0; }

  /// Hit refreshes recency. `owner` only selects whose statistics are updated.
  bool lookup(std::uint64_t block, std::string_view owner = {}) {
    auto it = entries_.find(block);
    bool hit = it != entries_.end();
    if (hit) touch(it->second);
    if (!owner.empty()) {
      auto& s = owners_[std::string(owner)].stats;
      hit ? ++s.hits : ++s.misses;
    }
    return hit;
  }

  /// Would traffic of this classification be cached?
  bool eligible(const Classification& c, std::uint64_t block) const {
    switch (c.cache_policy) {
      case CachePolicy::CacheYes:
      case CachePolicy::WriteBack: return true;
      case CachePolicy::CacheConditional: return !conditional_ || conditional_(c, block);
      case CachePolicy::CacheNo: return !exclusion_;
    }
    return false;
  }

  CacheOutcome admit(const Classification& c, std::uint64_t block, std::uint64_t size, bool dirty = false) {
    if (!eligible(c, block)) return CacheOutcome::Bypassed;
    if (auto it = entries_.find(block); it != entries_.end()) {
      it->second.dirty = it->second.dirty || dirty;
      touch(it->second);
      return CacheOutcome::AlreadyResident;
    }
    auto& owner = owners_[c.leaf];
    if (owner.quota) {
      auto q = static_cast<std::uint64_t>(*owner.quota * static_cast<double>(capacity_));
      if (q == 0) return CacheOutcome::QuotaExhausted;
      if (size > q) return CacheOutcome::Bypassed;
    }
    if (size > capacity_) return CacheOutcome::Bypassed;

    bool evicted = false;
    if (owner.quota) {
      auto q = static_cast<std::uint64_t>(*owner.quota * static_cast<double>(capacity_));
      while (owner.stats.resident_bytes + size > q) {
        evict(owner.lru.back());
        evicted = true;
      }
    }
    while (used_ + size > capacity_) {
      evict(global_.back());
      evicted = true;
    }

    global_.push_front(block);
    owner.lru.push_front(block);
    entries_.emplace(block, Entry{size, c.leaf, dirty, global_.begin(), owner.lru.begin()});
    owner.stats.resident_bytes += size;
    used_ += size;
    return evicted ? CacheOutcome::EvictedAndAdmitted : CacheOutcome::Admitted;
  }

  const CacheOwnerStats& stats(const std::string& owner) {
    return owners_[owner].stats;
  }

  std::map<std::string, CacheOwnerStats> all_stats() const {
    std::map<std::string, CacheOwnerStats> out;
    for (const auto& [k, v] : owners_) out.emplace(k, v.stats);
    return out;
  }

  void reset_stats() {
    for (auto& [k, v] : owners_) {
      v.stats.hits = v.stats.misses = v.stats.evictions = 0;
    }
  }

  /// Blocks from most to least recently used.
  std::vector<std::uint64_t> recency_order() const { return {global_.begin(), global_.end()}; }

 private:
  struct Entry {
    std::uint64_t size;
    std::string owner;
    bool dirty;
    std::list<std::uint64_t>::iterator global_pos;
    std::list<std::uint64_t>::iterator owner_pos;
  };

  struct Owner {
    std::optional<double> quota;
    std::list<std::uint64_t> lru;
    CacheOwnerStats stats;
  };

  void touch(Entry& e) {
    global_.splice(global_.begin(), global_, e.global_pos);
    auto& lru = owners_[e.owner].lru;
    lru.splice(lru.begin(), lru, e.owner_pos);
  }

  void evict(std::uint64_t block) {
    auto it = entries_.find(block);
    Entry& e = it->second;
    auto& owner = owners_[e.owner];
    global_.erase(e.global_pos);
    owner.lru.erase(e.owner_pos);
    owner.stats.resident_bytes -= e.size;
    ++owner.stats.evictions;
    used_ -= e.size;
    entries_.erase(it);
  }

  std::uint64_t capacity_;
  std::uint64_t used_ = 0;
  bool exclusion_ = true;
  Predicate conditional_;
  std::unordered_map<std::uint64_t, Entry> entries_;
  std::list<std::uint64_t> global_;
  std::map<std::string, Owner> owners_;
};

}  // namespace iorm
