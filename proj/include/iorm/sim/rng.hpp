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

#include <cstdint>
#include <random>
#include <string_view>

namespace iorm {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive an independent stream seed for a named component. Streams for
/// unrelated components stay stable when other components are added.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

inline Rng make_rng(std::uint64_t root, std::string_view label) { return Rng(derive_seed(root, label)); }

/// Wraps a generator and counts draws; used to verify that paths which must
/// not consume randomness really don't.
template <typename G>
class CountingRng {
 public:
  using result_type = typename G::result_type;
  explicit CountingRng(G& g) : g_(&g) {}
  static constexpr result_type min() { return G::min(); }
  static constexpr result_type max() { return G::max(); }
  result_type operator()() {
    ++draws_;
    return (*g_)();
  }
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  G* g_;
  std::uint64_t draws_ = 0;
};

/// Uniform integer in [0, n) by rejection; exact for integer ticket draws.
template <typename G>
std::uint64_t uniform_below(G& g, std::uint64_t n) {
  static_assert(G::min() == 0 && G::max() == UINT64_MAX, "needs a full 64-bit generator");
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
  std::uint64_t x;
  do x = g();
  while (x > limit);
  return x % n;
}

}  // namespace iorm
