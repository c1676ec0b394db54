// Copyright 2026 The HyperMix Authors
//
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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "hypermix/rng.hpp"

using hypermix::RandomStream;

TEST_SUITE("rng") {

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(hypermix::philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(hypermix::philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(hypermix::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same seed and stream reproduce the sequence") {
  RandomStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("split is deterministic and yields distinct children") {
  const RandomStream root(3);
  RandomStream a = root.split(1), b = root.split(1), c = root.split(2);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(root.split(1).next_u64() != c.next_u64());
  RandomStream parent(3);
  CHECK(parent.next_u64() != root.split(0).next_u64());
}

TEST_CASE("uniform lies in [0, 1) with mean near one half") {
  RandomStream r(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below covers the range without bias") {
  RandomStream r(2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = r.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  CHECK(r.below(1) == 0);
}

TEST_CASE("normal moments") {
  RandomStream r(4);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("gamma and beta means") {
  RandomStream r(5);
  for (double shape : {0.3, 1.0, 2.5, 20.0}) {
    double s = 0.0;
    for (int i = 0; i < 50000; ++i) s += r.gamma(shape);
    CHECK(s / 50000 == doctest::Approx(shape).epsilon(0.03));
  }
  for (auto [a, b] : {std::pair{2.0, 5.0}, std::pair{20.0, 20.0}, std::pair{0.1, 5.0}}) {
    double s = 0.0;
    for (int i = 0; i < 50000; ++i) {
      const double x = r.beta(a, b);
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
      s += x;
    }
    CHECK(s / 50000 == doctest::Approx(a / (a + b)).epsilon(0.03));
  }
}

TEST_CASE("partial_shuffle keeps a permutation and choose is distinct") {
  RandomStream r(6);
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  r.partial_shuffle(std::span<int>(v), 5);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) CHECK(sorted[i] == i);

  const auto picks = r.choose(10, 10);
  CHECK(std::set<std::size_t>(picks.begin(), picks.end()).size() == 10);
  CHECK(r.choose(10, 0).empty());
}

}  // TEST_SUITE
