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

#include <algorithm>
#include <random>
#include <vector>

#include "iorm/cache.hpp"

using namespace iorm;

namespace {

Classification of(std::string leaf, Category c) { return {std::move(leaf), c, Priority::Medium, default_cache_policy(c)}; }

const Classification kOltp = of("oltp", Category::BufferCacheRead);
const Classification kBackup = of("backup", Category::Backup);

// Reference LRU over equal-size blocks: vector front = most recent.
struct ReferenceLru {
  std::size_t cap;
  std::vector<std::uint64_t> order;
  bool access(std::uint64_t b) {
    auto it = std::find(order.begin(), order.end(), b);
    bool hit = it != order.end();
    if (hit) order.erase(it);
    order.insert(order.begin(), b);
    if (order.size() > cap) order.pop_back();
    return hit;
  }
};

double hit_rate_for_quota(double quota, const std::vector<std::uint64_t>& trace) {
  FlashCache c(100 * 8192);
  c.set_quota("oltp", quota);
  for (auto b : trace) {
    if (!c.lookup(b, "oltp")) c.admit(kOltp, b, 8192);
  }
  return c.stats("oltp").hit_rate();
}

}  // namespace

TEST(Cache, LookupBasics) {
  FlashCache c(2 * 8192);
  EXPECT_FALSE(c.lookup(1));
  EXPECT_EQ(c.admit(kOltp, 1, 8192), CacheOutcome::Admitted);
  EXPECT_TRUE(c.lookup(1));
  c.admit(kOltp, 2, 8192);
  EXPECT_EQ(c.admit(kOltp, 3, 8192), CacheOutcome::EvictedAndAdmitted);
  EXPECT_FALSE(c.lookup(1));
}

TEST(Cache, PolicyByCategory) {
  FlashCache c(1 << 20);
  EXPECT_EQ(c.admit(kBackup, 1, 8192), CacheOutcome::Bypassed);
  EXPECT_EQ(c.admit(of("x", Category::StorageRebalance), 2, 8192), CacheOutcome::Bypassed);
  EXPECT_EQ(c.admit(of("x", Category::TempWrite), 3, 8192), CacheOutcome::Bypassed);
  EXPECT_EQ(c.admit(of("x", Category::Untagged), 4, 8192), CacheOutcome::Bypassed);
  EXPECT_EQ(c.admit(kOltp, 5, 8192), CacheOutcome::Admitted);
  EXPECT_EQ(c.admit(of("x", Category::RedoLogWrite), 6, 8192, true), CacheOutcome::Admitted);
  EXPECT_EQ(c.admit(of("x", Category::DirectPathRead), 7, 8192), CacheOutcome::Admitted);
  c.set_conditional_predicate([](const Classification&, std::uint64_t b) { return b % 2 == 0; });
  EXPECT_EQ(c.admit(of("x", Category::DirectPathRead), 9, 8192), CacheOutcome::Bypassed);
  EXPECT_EQ(c.admit(of("x", Category::DirectPathRead), 10, 8192), CacheOutcome::Admitted);
}

TEST(Cache, ExclusionToggle) {
  FlashCache c(4 * 8192);
  c.set_exclusion_enabled(false);  // no traffic yet: nothing observable
  EXPECT_EQ(c.resident_entries(), 0u);
  for (std::uint64_t b = 0; b < 4; ++b) c.admit(kOltp, b, 8192);
  for (std::uint64_t b = 100; b < 104; ++b) c.admit(kBackup, b, 8192);
  for (std::uint64_t b = 0; b < 4; ++b) EXPECT_FALSE(c.contains(b));
  c.set_exclusion_enabled(true);
  for (std::uint64_t b = 0; b < 4; ++b) c.admit(kOltp, b, 8192);
  for (std::uint64_t b = 200; b < 204; ++b) c.admit(kBackup, b, 8192);
  for (std::uint64_t b = 0; b < 4; ++b) EXPECT_TRUE(c.contains(b));
}

TEST(Cache, ZeroQuota) {
  FlashCache c(1 << 20);
  c.set_quota("oltp", 0.0);
  EXPECT_EQ(c.admit(kOltp, 1, 8192), CacheOutcome::QuotaExhausted);
  EXPECT_FALSE(c.contains(1));
}

// Random trace on a 10-block cache against the reference LRU.
TEST(Cache, MatchesReferenceLru) {
  FlashCache c(10 * 8192);
  ReferenceLru ref{10, {}};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> block(0, 24);
  for (int i = 0; i < 20000; ++i) {
    auto b = block(rng);
    bool hit = c.lookup(b);
    if (!hit) c.admit(kOltp, b, 8192);
    ASSERT_EQ(hit, ref.access(b)) << "step " << i;
  }
  EXPECT_EQ(c.recency_order(), ref.order);
}

TEST(CacheProperty, CapacityAndQuotaNeverExceeded) {
  std::mt19937_64 rng(4);
  FlashCache c(64 * 8192);
  c.set_quota("a", 0.25);
  c.set_quota("b", 0.5);
  c.set_exclusion_enabled(false);
  const char* owners[] = {"a", "b", "c"};
  for (int i = 0; i < 50000; ++i) {
    auto o = owners[rng() % 3];
    auto cat = rng() % 4 == 0 ? Category::Backup : Category::BufferCacheRead;
    std::uint64_t b = rng() % 500;
    std::uint64_t size = 8192 * (1 + rng() % 4);
    if (!c.lookup(b, o)) c.admit(of(o, cat), b, size);
    ASSERT_LE(c.resident_bytes(), c.capacity());
    ASSERT_LE(c.stats("a").resident_bytes, *c.quota_bytes("a"));
    ASSERT_LE(c.stats("b").resident_bytes, *c.quota_bytes("b"));
  }
}

TEST(CacheProperty, HitRateMonotoneInQuota) {
  std::mt19937_64 rng(5);
  std::vector<std::uint64_t> trace;
  std::uniform_int_distribution<std::uint64_t> block(0, 149);
  for (int i = 0; i < 30000; ++i) trace.push_back(block(rng));
  double prev = -1;
  for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double h = hit_rate_for_quota(q, trace);
    EXPECT_GE(h, prev) << q;
    prev = h;
  }
  EXPECT_EQ(hit_rate_for_quota(0.0, trace), 0.0);
}

// With exclusion on, backup traffic cannot dent a working set that fits.
TEST(CacheProperty, ExclusionProtectsWorkingSet) {
  auto run = [](bool with_backup) {
    FlashCache c(100 * 8192);
    std::mt19937_64 rng(6);
    for (std::uint64_t b = 0; b < 80; ++b) c.admit(kOltp, b, 8192);
    c.reset_stats();
    for (int i = 0; i < 20000; ++i) {
      std::uint64_t b = rng() % 80;
      if (!c.lookup(b, "oltp")) c.admit(kOltp, b, 8192);
      if (with_backup) {
        std::uint64_t bb = 1000 + static_cast<std::uint64_t>(i);
        if (!c.lookup(bb, "backup")) c.admit(kBackup, bb, 8192);
      }
    }
    return c.stats("oltp").hit_rate();
  };
  double solo = run(false);
  EXPECT_GE(run(true), solo - 0.01);
}
