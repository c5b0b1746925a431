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

// I/O tags: the compact per-request metadata buffer, its wire codec, and the
// storage-side registry that turns tag primitives into a classification.
//
// Wire layout, version 1 (64 bytes, multi-byte fields big-endian):
//
//   offset size field
//   0      1    version            (1)
//   1      1    priority_hint      (0 = High, 1 = Medium, 2 = Low)
//   2      2    encoded length     (64)
//   4      4    database_id
//   8      4    file_number
//   12     4    workload_key       (0 = none; selects a provisioned workload)
//   16     8    block_offset       (in 8 KiB blocks)
//   24     4    block_count
//   28     36   reserved, zero

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iorm/error.hpp"
#include "iorm/hierarchy.hpp"

namespace iorm {

enum class Priority : std::uint8_t { High = 0, Medium = 1, Low = 2 };

enum class Category : std::uint8_t {
  RedoLogWrite,
  BufferCacheRead,
  DirectPathRead,
  DatabaseWrite,
  TempWrite,
  UndoWrite,
  Backup,
  StorageRebalance,
  Untagged,
};

enum class CachePolicy : std::uint8_t { WriteBack, CacheYes, CacheConditional, CacheNo };

inline constexpr std::array kAllCategories = {
    Category::RedoLogWrite, Category::BufferCacheRead, Category::DirectPathRead,
    Category::DatabaseWrite, Category::TempWrite,      Category::UndoWrite,
    Category::Backup,        Category::StorageRebalance, Category::Untagged,
};

inline constexpr std::array kAllPriorities = {Priority::High, Priority::Medium, Priority::Low};

constexpr CachePolicy default_cache_policy(Category c) noexcept {
  switch (c) {
    case Category::RedoLogWrite: return CachePolicy::WriteBack;
    case Category::BufferCacheRead: return CachePolicy::CacheYes;
    case Category::DirectPathRead: return CachePolicy::CacheConditional;
    case Category::DatabaseWrite: return CachePolicy::WriteBack;
    case Category::TempWrite: return CachePolicy::CacheNo;
    case Category::UndoWrite: return CachePolicy::CacheYes;
    case Category::Backup: return CachePolicy::CacheNo;
    case Category::StorageRebalance: return CachePolicy::CacheNo;
    case Category::Untagged: return CachePolicy::CacheNo;
  }
  return CachePolicy::CacheNo;
}

constexpr std::string_view to_string(Priority p) noexcept {
  switch (p) {
    case Priority::High: return "high";
    case Priority::Medium: return "medium";
    case Priority::Low: return "low";
  }
  return "low";
}

constexpr std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::RedoLogWrite: return "redo_log_write";
    case Category::BufferCacheRead: return "buffer_cache_read";
    case Category::DirectPathRead: return "direct_path_read";
    case Category::DatabaseWrite: return "database_write";
    case Category::TempWrite: return "temp_write";
    case Category::UndoWrite: return "undo_write";
    case Category::Backup: return "backup";
    case Category::StorageRebalance: return "storage_rebalance";
    case Category::Untagged: return "untagged";
  }
  return "untagged";
}

constexpr std::string_view to_string(CachePolicy p) noexcept {
  switch (p) {
    case CachePolicy::WriteBack: return "write_back";
    case CachePolicy::CacheYes: return "yes";
    case CachePolicy::CacheConditional: return "conditional";
    case CachePolicy::CacheNo: return "no";
  }
  return "no";
}

inline std::optional<Priority> parse_priority(std::string_view s) {
  for (auto p : kAllPriorities)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline std::optional<Category> parse_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

struct IoTag {
  std::uint8_t version = 1;
  std::uint32_t database_id = 0;
  std::uint32_t file_number = 0;
  std::uint32_t workload_key = 0;
  std::uint64_t block_offset = 0;
  std::uint32_t block_count = 1;
  Priority priority_hint = Priority::Medium;

  friend bool operator==(const IoTag&, const IoTag&) = default;
};

inline constexpr std::uint8_t kTagVersion = 1;
inline constexpr std::size_t kEncodedTagSize = 64;
inline constexpr std::uint64_t kBlockSize = 8192;

using EncodedTag = std::array<std::byte, kEncodedTagSize>;

namespace detail {

template <typename T>
void put_be(std::span<std::byte> out, std::size_t at, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out[at + i] = static_cast<std::byte>((value >> (8 * (sizeof(T) - 1 - i))) & 0xff);
}

template <typename T>
T get_be(std::span<const std::byte> in, std::size_t at) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value = static_cast<T>((value << 8) | std::to_integer<T>(in[at + i]));
  return value;
}

}  // namespace detail

inline EncodedTag encode_tag(const IoTag& tag) {
  EncodedTag out{};
  detail::put_be<std::uint8_t>(out, 0, tag.version);
  detail::put_be<std::uint8_t>(out, 1, static_cast<std::uint8_t>(tag.priority_hint));
  detail::put_be<std::uint16_t>(out, 2, static_cast<std::uint16_t>(kEncodedTagSize));
  detail::put_be<std::uint32_t>(out, 4, tag.database_id);
  detail::put_be<std::uint32_t>(out, 8, tag.file_number);
  detail::put_be<std::uint32_t>(out, 12, tag.workload_key);
  detail::put_be<std::uint64_t>(out, 16, tag.block_offset);
  detail::put_be<std::uint32_t>(out, 24, tag.block_count);
  return out;
}

/// Throws Error{TruncatedTag | UnknownVersion | MalformedTag}.
inline IoTag decode_tag(std::span<const std::byte> bytes) {
  if (bytes.empty()) throw Error(Errc::TruncatedTag, "empty tag buffer");
  auto version = std::to_integer<std::uint8_t>(bytes[0]);
  if (version != kTagVersion) throw Error(Errc::UnknownVersion, "tag version " + std::to_string(version));
  if (bytes.size() < kEncodedTagSize)
    throw Error(Errc::TruncatedTag, "tag is " + std::to_string(bytes.size()) + " bytes");
  if (bytes.size() > kEncodedTagSize || detail::get_be<std::uint16_t>(bytes, 2) != kEncodedTagSize)
    throw Error(Errc::MalformedTag, "tag length mismatch");
  auto prio = std::to_integer<std::uint8_t>(bytes[1]);
  if (prio > static_cast<std::uint8_t>(Priority::Low)) throw Error(Errc::MalformedTag, "bad priority hint");

  IoTag tag;
  tag.version = version;
  tag.priority_hint = static_cast<Priority>(prio);
  tag.database_id = detail::get_be<std::uint32_t>(bytes, 4);
  tag.file_number = detail::get_be<std::uint32_t>(bytes, 8);
  tag.workload_key = detail::get_be<std::uint32_t>(bytes, 12);
  tag.block_offset = detail::get_be<std::uint64_t>(bytes, 16);
  tag.block_count = detail::get_be<std::uint32_t>(bytes, 24);
  return tag;
}

/// Decode, mapping any failure to "no tag" so the request is treated as untagged.
inline std::optional<IoTag> try_decode_tag(std::span<const std::byte> bytes) noexcept {
  try {
    return decode_tag(bytes);
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct Classification {
  std::string leaf;
  Category category = Category::Untagged;
  Priority priority = Priority::Low;
  CachePolicy cache_policy = CachePolicy::CacheNo;

  friend bool operator==(const Classification&, const Classification&) = default;
};

struct FileRange {
  std::uint32_t first = 0;
  std::uint32_t last = 0;
  Category category = Category::Untagged;
};

/// Default file-number layout used for tenants provisioned without an explicit
/// file map: one block of 100 file numbers per category.
inline std::vector<FileRange> default_file_ranges() {
  return {
      {1, 99, Category::BufferCacheRead},     {100, 199, Category::DirectPathRead},
      {200, 299, Category::DatabaseWrite},    {300, 399, Category::TempWrite},
      {400, 499, Category::RedoLogWrite},     {500, 599, Category::UndoWrite},
      {600, 699, Category::Backup},           {700, 799, Category::StorageRebalance},
  };
}

/// First file number of the default range for `c` (0 for Untagged).
inline std::uint32_t default_file_for(Category c) {
  for (const auto& r : default_file_ranges())
    if (r.category == c) return r.first;
  return 0;
}

struct TenantEntry {
  std::string node;                                  // PDB (or any) plan node
  std::map<std::uint32_t, std::string> workloads;    // workload_key -> leaf id
  std::vector<FileRange> files = default_file_ranges();
};

/// Metadata provisioned when a PDB is created. Lookups are total.
struct ClassificationRegistry {
  std::map<std::uint32_t, TenantEntry> tenants;
  std::map<std::string, Priority> subsystem_priority = {
      {"foreground", Priority::High},  {"log_writer", Priority::High}, {"db_writer", Priority::Low},
      {"recovery", Priority::Medium},  {"backup", Priority::Low},      {"pq_coordinator", Priority::Low},
      {"rebalance", Priority::Low},
  };

  Priority priority_for(std::string_view subsystem) const {
    auto it = subsystem_priority.find(std::string(subsystem));
    return it == subsystem_priority.end() ? Priority::Medium : it->second;
  }
};

inline Classification untagged_classification(const ResourcePlan& plan) {
  return {plan.node(plan.default_leaf()).id, Category::Untagged, Priority::Low, CachePolicy::CacheNo};
}

/// Derive leaf, category, priority and cache policy for a request. Absent tags
/// and unknown tenants fall back to the plan's default leaf.
inline Classification classify(const ClassificationRegistry& registry, const ResourcePlan& plan,
                               const std::optional<IoTag>& tag) {
  if (!tag) return untagged_classification(plan);
  auto tenant = registry.tenants.find(tag->database_id);
  if (tenant == registry.tenants.end()) return untagged_classification(plan);

  std::optional<NodeIndex> leaf;
  if (tag->workload_key != 0) {
    if (auto w = tenant->second.workloads.find(tag->workload_key); w != tenant->second.workloads.end())
      if (auto i = plan.find(w->second)) leaf = plan.resolve_leaf(*i);
  }
  if (!leaf)
    if (auto i = plan.find(tenant->second.node)) leaf = plan.resolve_leaf(*i);
  if (!leaf) return untagged_classification(plan);

  Category category = Category::Untagged;
  for (const auto& r : tenant->second.files) {
    if (tag->file_number >= r.first && tag->file_number <= r.last) {
      category = r.category;
      break;
    }
  }
  return {plan.node(*leaf).id, category, tag->priority_hint, default_cache_policy(category)};
}

/// Classify straight from wire bytes; undecodable buffers are untagged.
inline Classification classify_bytes(const ClassificationRegistry& registry, const ResourcePlan& plan,
                                     std::span<const std::byte> bytes) {
  return classify(registry, plan, try_decode_tag(bytes));
}

}  // namespace iorm
