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

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "iorm/tags.hpp"

using namespace iorm;

namespace {

ResourcePlan sample_plan() {
  PlanSpec spec{{{"CDB1", "", Level::cdb(), 1, std::nullopt, false},
                 {"PDB1", "CDB1", Level::pdb(), 1, std::nullopt, false},
                 {"PDB1.oltp", "PDB1", Level::workload(), 3, std::nullopt, false},
                 {"PDB1.batch", "PDB1", Level::workload(), 1, std::nullopt, false},
                 {"PDB2", "CDB1", Level::pdb(), 1, std::nullopt, false},
                 {"OTHER", "", Level::cdb(), 1, std::nullopt, true}},
                Objective::Auto,
                1};
  return build_plan(spec);
}

ClassificationRegistry sample_registry() {
  ClassificationRegistry r;
  r.tenants[17] = TenantEntry{"PDB1", {{1, "PDB1.oltp"}, {2, "PDB1.batch"}}};
  r.tenants[18] = TenantEntry{"PDB2", {}};
  return r;
}

std::vector<std::byte> bytes(std::initializer_list<int> v) {
  std::vector<std::byte> out;
  for (int b : v) out.push_back(static_cast<std::byte>(b));
  out.resize(kEncodedTagSize);
  return out;
}

Errc decode_error(std::span<const std::byte> b) {
  try {
    decode_tag(b);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected decode to fail";
  return Errc::IoError;
}

}  // namespace

// Field-by-field expected wire bytes for a fixed tag.
TEST(Tags, GoldenVector) {
  IoTag t;
  t.database_id = 0x01020304;
  t.file_number = 0x00000105;
  t.workload_key = 0x0000000a;
  t.block_offset = 0x1122334455667788ULL;
  t.block_count = 0x00000010;
  t.priority_hint = Priority::Low;
  auto golden = bytes({0x01, 0x02, 0x00, 0x40,                           // version, prio, length
                       0x01, 0x02, 0x03, 0x04,                           // database
                       0x00, 0x00, 0x01, 0x05,                           // file
                       0x00, 0x00, 0x00, 0x0a,                           // workload key
                       0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88,   // block offset
                       0x00, 0x00, 0x00, 0x10});                         // block count
  auto enc = encode_tag(t);
  ASSERT_EQ(enc.size(), golden.size());
  for (std::size_t i = 0; i < enc.size(); ++i) EXPECT_EQ(enc[i], golden[i]) << "byte " << i;
  EXPECT_EQ(decode_tag(golden), t);
}

TEST(Tags, DecodeErrors) {
  std::vector<std::byte> empty;
  EXPECT_EQ(decode_error(empty), Errc::TruncatedTag);

  auto enc = encode_tag(IoTag{});
  std::vector<std::byte> v(enc.begin(), enc.end());
  v[0] = std::byte{2};
  EXPECT_EQ(decode_error(v), Errc::UnknownVersion);

  v.assign(enc.begin(), enc.begin() + 10);
  EXPECT_EQ(decode_error(v), Errc::TruncatedTag);

  v.assign(enc.begin(), enc.end());
  v.push_back(std::byte{0});
  EXPECT_EQ(decode_error(v), Errc::MalformedTag);

  v.assign(enc.begin(), enc.end());
  v[3] = std::byte{0x41};
  EXPECT_EQ(decode_error(v), Errc::MalformedTag);

  v.assign(enc.begin(), enc.end());
  v[1] = std::byte{3};
  EXPECT_EQ(decode_error(v), Errc::MalformedTag);
}

TEST(TagsProperty, RoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    IoTag t;
    t.database_id = static_cast<std::uint32_t>(rng());
    t.file_number = static_cast<std::uint32_t>(rng());
    t.workload_key = static_cast<std::uint32_t>(rng());
    t.block_offset = rng();
    t.block_count = static_cast<std::uint32_t>(rng());
    t.priority_hint = static_cast<Priority>(rng() % 3);
    auto enc = encode_tag(t);
    ASSERT_EQ(decode_tag(enc), t);
  }
}

// Arbitrary buffers either decode or fail with one of the tag errors.
TEST(TagsProperty, FuzzDecodeNeverMisbehaves) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(0, 80), byte(0, 255);
  int ok = 0;
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::byte> v(len(rng));
    for (auto& b : v) b = static_cast<std::byte>(byte(rng));
    if (i % 4 == 0) {
      v.resize(kEncodedTagSize);
      v[0] = std::byte{1};
      v[2] = std::byte{0};
      v[3] = std::byte{64};
    }
    try {
      decode_tag(v);
      ++ok;
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == Errc::TruncatedTag || e.code() == Errc::UnknownVersion || e.code() == Errc::MalformedTag);
    }
    EXPECT_EQ(try_decode_tag(v).has_value(), v.size() == kEncodedTagSize && v[0] == std::byte{1} &&
                                                   v[2] == std::byte{0} && v[3] == std::byte{64} &&
                                                   std::to_integer<int>(v[1]) <= 2);
  }
  EXPECT_GT(ok, 0);
}

TEST(Tags, ClassifyUntagged) {
  auto plan = sample_plan();
  auto c = classify(sample_registry(), plan, std::nullopt);
  EXPECT_EQ(c, (Classification{"OTHER/default/default", Category::Untagged, Priority::Low, CachePolicy::CacheNo}));
}

TEST(Tags, ClassifyByCategoryTable) {
  auto plan = sample_plan();
  auto reg = sample_registry();
  struct Row {
    std::uint32_t file;
    Category cat;
    CachePolicy cache;
  };
  const Row rows[] = {
      {1, Category::BufferCacheRead, CachePolicy::CacheYes},
      {150, Category::DirectPathRead, CachePolicy::CacheConditional},
      {200, Category::DatabaseWrite, CachePolicy::WriteBack},
      {399, Category::TempWrite, CachePolicy::CacheNo},
      {400, Category::RedoLogWrite, CachePolicy::WriteBack},
      {550, Category::UndoWrite, CachePolicy::CacheYes},
      {600, Category::Backup, CachePolicy::CacheNo},
      {799, Category::StorageRebalance, CachePolicy::CacheNo},
  };
  for (const auto& r : rows) {
    IoTag t;
    t.database_id = 17;
    t.file_number = r.file;
    t.workload_key = 1;
    t.priority_hint = Priority::High;
    auto c = classify(reg, plan, t);
    EXPECT_EQ(c.leaf, "PDB1.oltp");
    EXPECT_EQ(c.category, r.cat) << r.file;
    EXPECT_EQ(c.cache_policy, r.cache) << r.file;
    EXPECT_EQ(c.priority, Priority::High);
  }
}

TEST(Tags, ClassifyFallbacks) {
  auto plan = sample_plan();
  auto reg = sample_registry();
  IoTag t;
  t.database_id = 17;
  t.workload_key = 1;
  t.file_number = 5000;  // not in any range: category unknown, leaf kept
  auto c = classify(reg, plan, t);
  EXPECT_EQ(c.category, Category::Untagged);
  EXPECT_EQ(c.cache_policy, CachePolicy::CacheNo);
  EXPECT_EQ(c.leaf, "PDB1.oltp");

  t.workload_key = 2;
  EXPECT_EQ(classify(reg, plan, t).leaf, "PDB1.batch");

  // PDB2 has no declared workloads, so its traffic lands on its implicit default.
  t.database_id = 18;
  t.workload_key = 0;
  EXPECT_EQ(classify(reg, plan, t).leaf, "PDB2/default");
  t.workload_key = 99;
  EXPECT_EQ(classify(reg, plan, t).leaf, "PDB2/default");

  // PDB1 declares workloads but no default one: no workload key means the
  // plan's untagged default.
  t.database_id = 17;
  t.workload_key = 0;
  EXPECT_EQ(classify(reg, plan, t).leaf, plan.node(plan.default_leaf()).id);

  t.database_id = 99;  // unknown tenant
  EXPECT_EQ(classify(reg, plan, t).leaf, plan.node(plan.default_leaf()).id);

  auto enc = encode_tag(t);
  std::vector<std::byte> bad(enc.begin(), enc.begin() + 8);
  EXPECT_EQ(classify_bytes(reg, plan, bad), untagged_classification(plan));
}

TEST(Tags, SubsystemPriorities) {
  ClassificationRegistry r;
  EXPECT_EQ(r.priority_for("foreground"), Priority::High);
  EXPECT_EQ(r.priority_for("log_writer"), Priority::High);
  EXPECT_EQ(r.priority_for("recovery"), Priority::Medium);
  EXPECT_EQ(r.priority_for("backup"), Priority::Low);
  EXPECT_EQ(r.priority_for("pq_coordinator"), Priority::Low);
}
