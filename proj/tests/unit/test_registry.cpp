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

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dubhe/paillier.hpp"
#include "dubhe/registry.hpp"

using namespace dubhe;
using namespace dubhe::registry;

namespace {

RegistryScheme reference_scheme() { return RegistryScheme::with_free_thresholds(10, {1, 2, 10}, std::vector<double>{0.7, 0.1}); }

dist::ClassHistogram hist(std::vector<std::uint64_t> v) { return dist::ClassHistogram(std::move(v)); }

}  // namespace

TEST_SUITE("registry") {
  TEST_CASE("binomial coefficients") {
    CHECK(binomial(10, 0) == 1);
    CHECK(binomial(10, 2) == 45);
    CHECK(binomial(10, 10) == 1);
    CHECK(binomial(5, 7) == 0);
    CHECK(binomial(62, 31) == 465428353255261088ULL);
    CHECK_THROWS_AS(binomial(100, 50), std::overflow_error);
  }

  TEST_CASE("registry lengths") {
    CHECK(reference_scheme().length() == 56);
    CHECK(RegistryScheme::with_free_thresholds(10, {1, 10}, std::vector<double>{0.5}).length() == 11);
    const auto s = RegistryScheme::with_free_thresholds(10, {2, 10}, std::vector<double>{0.2});
    CHECK(s.length() == 46);
    CHECK(reference_scheme().offset_of(2) == 10);
    CHECK(reference_scheme().offset_of(10) == 55);
    CHECK(reference_scheme().sub_length(2) == 45);
  }

  TEST_CASE("lexicographic ranks") {
    CHECK(rank_combination(Category({0, 1}), 10) == 0);
    CHECK(rank_combination(Category({8, 9}), 10) == 44);
    CHECK(rank_combination(Category({0, 2}), 10) == 1);
    CHECK(rank_combination(Category({1, 2}), 10) == 9);
    CHECK(unrank_combination(44, 2, 10) == Category({8, 9}));
    CHECK_THROWS_AS(Category({2, 1}), std::invalid_argument);
    CHECK_THROWS_AS(unrank_combination(45, 2, 10), std::out_of_range);
  }

  TEST_CASE("rank and unrank are inverse bijections") {
    for (std::size_t c = 1; c <= 12; ++c) {
      for (std::size_t i = 1; i <= c; ++i) {
        const auto n = binomial(c, i);
        Category prev;
        for (std::uint64_t r = 0; r < n; ++r) {
          const Category u = unrank_combination(r, i, c);
          REQUIRE(u.size() == i);
          REQUIRE(rank_combination(u, c) == r);
          if (r > 0) REQUIRE(prev < u);
          prev = u;
        }
      }
    }
  }

  TEST_CASE("codebook dump") {
    std::ostringstream os;
    reference_scheme().dump_codebook(os);
    std::istringstream is(os.str());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);
    REQUIRE(lines.size() == 56);
    CHECK(lines[0] == "0 1 (0)");
    CHECK(lines[10] == "10 2 (0,1)");
    CHECK(lines[54] == "54 2 (8,9)");
    CHECK(lines[55] == "55 10 (0,1,2,3,4,5,6,7,8,9)");
  }

  TEST_CASE("slots and categories agree") {
    const auto s = reference_scheme();
    for (std::size_t slot = 0; slot < s.length(); ++slot) CHECK(s.slot_of(s.category_at(slot)) == slot);
  }

  TEST_CASE("threshold validation") {
    std::string why;
    CHECK(thresholds_valid({1, 2, 10}, 10, std::vector<double>{0.7, 0.1}));
    CHECK(thresholds_valid({1, 2, 10}, 10, std::vector<double>{0.9, 0.5}));
    CHECK_FALSE(thresholds_valid({1, 2, 10}, 10, std::vector<double>{0.7, 0.55}, &why));
    CHECK(why.find("1/2") != std::string::npos);
    CHECK_FALSE(thresholds_valid({1, 2, 10}, 10, std::vector<double>{1.2, 0.1}));
    CHECK_FALSE(thresholds_valid({1, 2, 10}, 10, std::vector<double>{0.7}));
    CHECK_FALSE(thresholds_valid({1, 2, 10}, 10, std::vector<double>{0.7, 0.1, 0.1}));
    CHECK_THROWS_AS(RegistryScheme::with_free_thresholds(10, {1, 2}, std::vector<double>{0.7, 0.1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(RegistryScheme::with_free_thresholds(10, {2, 1, 10}, std::vector<double>{0.1, 0.7}),
                    std::invalid_argument);
    CHECK(reference_scheme().threshold_for(10) == 0.0);
  }

  TEST_CASE("registration examples") {
    const auto s = reference_scheme();
    const auto a = register_client(hist({5, 5, 5, 80, 5, 0, 0, 0, 0, 0}), s);
    CHECK(a.category == Category({3}));
    CHECK(a.registry.slot() == 3);
    CHECK(a.registry.slot() < s.sub_length(1));
    const auto b = register_client(hist({45, 45, 1, 1, 1, 1, 1, 1, 2, 2}), s);
    CHECK(b.category == Category({0, 1}));
    CHECK(b.registry.slot() == 10);
    // A uniform client has no dominating classes once sigma_2 exceeds 1/C.
    const auto strict = RegistryScheme::with_free_thresholds(10, {1, 2, 10}, std::vector<double>{0.7, 0.15});
    const auto c = register_client(hist(std::vector<std::uint64_t>(10, 7)), strict);
    CHECK(c.category.size() == 10);
    CHECK(c.registry.slot() == 55);
    // At sigma_2 = 1/C the second largest share meets the threshold exactly.
    CHECK(register_client(hist(std::vector<std::uint64_t>(10, 7)), s).category == Category({0, 1}));
  }

  TEST_CASE("registries are one-hot and scale invariant") {
    const auto s = reference_scheme();
    Rng rng(1);
    for (int t = 0; t < 10000; ++t) {
      std::vector<std::uint64_t> v(10);
      for (auto& x : v) x = rng.uniform_int(0, 20) * rng.uniform_int(0, 3);
      if (std::accumulate(v.begin(), v.end(), std::uint64_t{0}) == 0) v[0] = 1;
      const auto r = register_client(hist(v), s);
      const auto& bits = r.registry.bits();
      REQUIRE(bits.size() == 56);
      REQUIRE(std::count(bits.begin(), bits.end(), 1) == 1);
      for (auto& x : v) x *= 3;
      REQUIRE(register_client(hist(v), s).registry.slot() == r.registry.slot());
    }
  }

  TEST_CASE("aggregation counts categories") {
    std::vector<Registry> rs(7, Registry(56, 12));
    const auto a = aggregate(rs);
    CHECK(a[12] == 7);
    CHECK(a.support() == 1);
    CHECK(a.total() == 7);
    CHECK(a.count_for(rs[0]) == 7);
    rs.emplace_back(56, 3);
    const auto b = aggregate(rs);
    CHECK(b.support() == 2);
    CHECK(b.count_for(Registry(56, 3)) == 1);
    CHECK(b.count_for(Registry(56, 4)) == 0);
    rs.emplace_back(11, 3);
    CHECK_THROWS_AS(aggregate(rs), std::invalid_argument);
  }

  TEST_CASE("encrypted aggregation matches the plaintext sum") {
    const auto s = reference_scheme();
    Rng rng(2);
    crypto::KeygenOptions o;
    o.allow_insecure = true;
    const auto kp = crypto::keygen(128, rng, o);
    std::vector<Registry> rs;
    for (int k = 0; k < 40; ++k) rs.emplace_back(56, rng.uniform_int(0, 55));
    crypto::EncryptedVector acc = crypto::encrypt_vector(kp.public_key, rs[0].as_counts(), rng);
    for (std::size_t k = 1; k < rs.size(); ++k) {
      acc = crypto::add_vectors(kp.public_key, acc, crypto::encrypt_vector(kp.public_key, rs[k].as_counts(), rng));
    }
    CHECK(AggregateRegistry(crypto::decrypt_vector(kp.secret_key, acc)) == aggregate(rs));
  }
}
