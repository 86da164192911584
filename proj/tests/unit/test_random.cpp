/**
 * Copyright 2026 The Dubhe Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "dubhe/random.hpp"

using namespace dubhe;

TEST_SUITE("random") {
  TEST_CASE("derived seeds are deterministic and path sensitive") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    CHECK(derive_seed(1, {0}) != derive_seed(1, {0, 0}));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(9, {i}));
    CHECK(seen.size() == 1000);
  }

  TEST_CASE("uniform draws stay in range and look uniform") {
    Rng rng(3);
    std::vector<int> bins(10, 0);
    for (int i = 0; i < 100000; ++i) {
      const double u = rng.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      const auto k = rng.uniform_int(3, 12);
      REQUIRE(k >= 3);
      REQUIRE(k <= 12);
      bins[k - 3] += 1;
    }
    double chi2 = 0.0;
    for (int b : bins) chi2 += (b - 10000.0) * (b - 10000.0) / 10000.0;
    CHECK(chi2 < 27.88);  // df = 9, p = 0.001
    CHECK_THROWS_AS(rng.uniform_int(5, 4), std::invalid_argument);
  }

  TEST_CASE("weighted index follows the weights") {
    Rng rng(5);
    std::vector<double> w{1.0, 0.0, 3.0};
    std::vector<int> hits(3, 0);
    for (int i = 0; i < 40000; ++i) hits[rng.weighted_index(w)] += 1;
    CHECK(hits[1] == 0);
    CHECK(hits[2] / 40000.0 == doctest::Approx(0.75).epsilon(0.02));
    CHECK_THROWS(rng.weighted_index({0.0, 0.0}));
    CHECK_THROWS(rng.weighted_index({-1.0, 2.0}));
  }

  TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
    SplitMix64 s(7), t(7);
    for (int i = 0; i < 100; ++i) CHECK(s() == t());
  }
}
