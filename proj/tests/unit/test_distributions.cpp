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

#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "dubhe/diagnostics.hpp"
#include "dubhe/distributions.hpp"

using namespace dubhe;
using namespace dubhe::dist;

namespace {

ClassHistogram one_hot(std::size_t c, std::size_t cls, std::uint64_t count = 10) {
  std::vector<std::uint64_t> v(c, 0);
  v[cls] = count;
  return ClassHistogram(v);
}

ClassDistribution random_distribution(Rng& rng, std::size_t c) {
  std::vector<double> w(c);
  for (double& x : w) x = rng.uniform01() + 1e-3;
  return ClassDistribution::normalized(w);
}

}  // namespace

TEST_SUITE("distributions") {
  TEST_CASE("l1 distance examples") {
    CHECK(l1_distance(ClassDistribution({1.0, 0.0}), ClassDistribution({0.5, 0.5})) == doctest::Approx(1.0));
    const auto u = ClassDistribution::uniform(10);
    CHECK(l1_distance(u, u) == 0.0);
    CHECK(l1_distance(ClassDistribution::from_histogram(one_hot(10, 4)), u) == doctest::Approx(1.8));
    CHECK_THROWS_AS(l1_distance(u, ClassDistribution::uniform(9)), std::invalid_argument);
  }

  TEST_CASE("l1 distance is a metric bounded by 2") {
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
      const auto p = random_distribution(rng, 10), q = random_distribution(rng, 10), r = random_distribution(rng, 10);
      const double pq = l1_distance(p, q);
      CHECK(pq == doctest::Approx(l1_distance(q, p)));
      CHECK(pq >= 0.0);
      CHECK(pq <= 2.0 + 1e-12);
      CHECK(pq <= l1_distance(p, r) + l1_distance(r, q) + 1e-12);
    }
  }

  TEST_CASE("distribution validation") {
    CHECK_THROWS_AS(ClassDistribution({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(ClassDistribution({1.5, -0.5}), std::invalid_argument);
    CHECK_THROWS_AS(ClassDistribution::from_histogram(ClassHistogram({0, 0})), std::invalid_argument);
    CHECK_THROWS_AS(ClassDistribution::normalized(std::vector<double>{0.0, 0.0}), std::invalid_argument);
  }

  TEST_CASE("imbalance ratio") {
    CHECK(imbalance_ratio(ClassDistribution::uniform(10)) == doctest::Approx(1.0));
    std::vector<std::uint64_t> counts(10, 100);
    counts[9] = 10;
    CHECK(imbalance_ratio(ClassHistogram(counts)) == doctest::Approx(10.0));
    counts[9] = 0;
    CHECK(imbalance_ratio(ClassHistogram(counts)) == kInfiniteRatio);
  }

  TEST_CASE("KL divergence") {
    const auto u = ClassDistribution::uniform(10);
    CHECK(kl_divergence(u, u) == doctest::Approx(0.0));
    CHECK(kl_divergence(ClassDistribution::from_histogram(one_hot(10, 0)), u) == doctest::Approx(std::log(10.0)));
    const ClassDistribution p({0.2, 0.3, 0.5}), q({0.5, 0.25, 0.25});
    const double oracle = 0.2 * std::log(0.4) + 0.3 * std::log(1.2) + 0.5 * std::log(2.0);
    CHECK(kl_divergence(p, q) == doctest::Approx(oracle));
    CHECK(std::isinf(kl_divergence(u, ClassDistribution::from_histogram(one_hot(10, 0)))));
  }

  TEST_CASE("global proportions") {
    const auto flat = generate_global_proportions(10, 1.0);
    for (double p : flat.probs()) CHECK(p == doctest::Approx(0.1));
    const auto g = generate_global_proportions(10, 10.0);
    CHECK(g[0] / g[9] == doctest::Approx(10.0));
    for (std::size_t j = 1; j < 10; ++j) CHECK(g[j] <= g[j - 1]);
    CHECK(imbalance_ratio(g) == doctest::Approx(10.0));
    CHECK_THROWS_AS(generate_global_proportions(10, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(generate_global_proportions(1, 2.0), std::invalid_argument);
  }

  TEST_CASE("shuffled classes keep the multiset") {
    Rng rng(2);
    const auto g = generate_global_proportions(10, 10.0);
    auto a = g.probs(), b = shuffle_classes(g, rng).probs();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  TEST_CASE("largest remainder rounding") {
    CHECK(largest_remainder(std::vector<double>{1, 1, 1}, 2) == std::vector<std::uint64_t>{1, 1, 0});
    CHECK(largest_remainder(std::vector<double>{0.5, 0.25, 0.25}, 4) == std::vector<std::uint64_t>{2, 1, 1});
    CHECK(largest_remainder(std::vector<double>{0.0, 3.0}, 7) == std::vector<std::uint64_t>{0, 7});
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> w(7);
      for (double& x : w) x = rng.uniform01();
      const auto total = rng.uniform_int(1, 500);
      const auto r = largest_remainder(w, total);
      CHECK(std::accumulate(r.begin(), r.end(), std::uint64_t{0}) == total);
      const double s = std::accumulate(w.begin(), w.end(), 0.0);
      for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::fabs(double(r[j]) - w[j] / s * double(total)) < 1.0);
    }
  }

  TEST_CASE("population distribution") {
    const std::vector<ClassHistogram> single{ClassHistogram({3, 1, 0})};
    CHECK(population_distribution(single).probs() == std::vector<double>{0.75, 0.25, 0.0});
    const std::vector<ClassHistogram> pair{one_hot(10, 0), one_hot(10, 1)};
    const auto p = population_distribution(pair);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(p[2] == 0.0);
    CHECK_THROWS_AS(population_distribution(std::span<const ClassHistogram>{}), std::invalid_argument);
  }

  TEST_CASE("population distribution of random subsets matches a count-sum oracle") {
    DatasetParams params;
    params.num_clients = 200;
    const auto ds = make_dataset(params);
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::size_t> ids;
      std::vector<double> sum(10, 0.0);
      double total = 0.0;
      for (std::size_t k = 0; k < ds.num_clients; ++k) {
        if (rng.uniform01() < 0.1) {
          ids.push_back(k);
          for (std::size_t j = 0; j < 10; ++j) sum[j] += double(ds.clients[k][j]);
          total += double(ds.clients[k].total());
        }
      }
      if (ids.empty()) continue;
      const auto p = population_distribution(ds.clients, ids);
      for (std::size_t j = 0; j < 10; ++j) CHECK(p[j] == doctest::Approx(sum[j] / total));
    }
  }

  TEST_CASE("pooling all clients recovers the global profile") {
    DatasetParams params;
    const auto ds = make_dataset(params);
    CHECK(l1_distance(ds.realized_global(), ds.global) < 0.02);
    CHECK(ds.rho_realized == doctest::Approx(10.0).epsilon(0.05));
  }

  TEST_CASE("mean over uniform random selections approaches the global profile") {
    DatasetParams params;
    const auto ds = make_dataset(params);
    Rng rng(5);
    std::vector<double> mean(10, 0.0);
    const int reps = 10000;
    for (int t = 0; t < reps; ++t) {
      std::vector<std::size_t> ids;
      while (ids.size() < 20) {
        const auto k = rng.uniform_int(0, ds.num_clients - 1);
        if (std::find(ids.begin(), ids.end(), k) == ids.end()) ids.push_back(k);
      }
      const auto p = population_distribution(ds.clients, ids);
      for (std::size_t j = 0; j < 10; ++j) mean[j] += p[j] / reps;
    }
    CHECK(l1_distance(ClassDistribution::normalized(mean), ds.realized_global()) < 0.02);
  }

  TEST_CASE("generator meets targets across the grid") {
    for (double rho : {1.0, 2.0, 5.0, 10.0}) {
      for (double emd : {0.0, 0.5, 1.0, 1.5}) {
        CAPTURE(rho);
        CAPTURE(emd);
        DatasetParams params;
        params.rho = rho;
        params.emd = emd;
        const auto ds = make_dataset(params);
        REQUIRE(ds.clients.size() == 1000);
        for (const auto& h : ds.clients) REQUIRE(h.total() == 128);
        double realized = 0.0;
        for (const auto& h : ds.clients) realized += l1_distance(ClassDistribution::from_histogram(h), ds.global);
        realized /= double(ds.clients.size());
        CHECK(realized == doctest::Approx(ds.emd_realized));
        if (emd > 0.0) {
          CHECK(std::fabs(realized - emd) <= 0.02);
        } else {
          CHECK(ds.mixing == 0.0);
          CHECK(realized <= 0.03);
        }
        CHECK(ds.rho_realized == doctest::Approx(rho).epsilon(0.1));
      }
    }
  }

  TEST_CASE("emd zero with rho one keeps every client at the rounded uniform profile") {
    DatasetParams params;
    params.rho = 1.0;
    params.emd = 0.0;
    params.num_clients = 50;
    WarningSink prev = set_warning_sink([](const std::string&) {});
    const auto ds = make_dataset(params);
    set_warning_sink(prev);
    CHECK(ds.mixing == 0.0);
    // 128 samples over 10 classes: every count is 12 or 13 and the pooled
    // data is exactly balanced.
    for (const auto& h : ds.clients)
      for (auto v : h.counts()) CHECK((v == 12 || v == 13));
    CHECK(ds.rho_realized == doctest::Approx(1.0));
  }

  TEST_CASE("reference configuration") {
    DatasetParams params;
    const auto ds = make_dataset(params);
    CHECK(std::fabs(ds.emd_realized - 1.5) <= 0.02);
    CHECK(ds.mixing > 0.0);
    CHECK(ds.mixing <= 1.0);
  }

  TEST_CASE("one-class family reaches near-pure clients") {
    const auto g = generate_global_proportions(10, 1.0);
    Rng rng(6);
    PartitionOptions o;
    o.family = SkewFamily::kOneClass;
    const auto ds = generate_client_partitions(g, 100, 128, 1.75, rng, o);
    std::size_t mostly_one = 0;
    for (const auto& h : ds.clients) {
      const auto m = *std::max_element(h.counts().begin(), h.counts().end());
      if (m >= 115) ++mostly_one;
    }
    CHECK(mostly_one >= 90);
  }

  TEST_CASE("two-class family cannot exceed its ceiling") {
    const auto g = generate_global_proportions(10, 1.0);
    Rng rng(7);
    PartitionOptions o;
    o.family = SkewFamily::kTwoClass;
    CHECK_THROWS_AS(generate_client_partitions(g, 100, 128, 1.7, rng, o), InfeasibleTarget);
    CHECK_THROWS_AS(generate_client_partitions(g, 100, 128, 2.0, rng, o), std::invalid_argument);
  }

  TEST_CASE("generation is deterministic in its parameters") {
    DatasetParams params;
    params.num_clients = 300;
    const auto a = make_dataset(params), b = make_dataset(params);
    CHECK(a.clients == b.clients);
    params.seed = 2;
    CHECK_FALSE(make_dataset(params).clients == a.clients);
  }

  TEST_CASE("class shuffling permutes the profile") {
    DatasetParams params;
    params.num_clients = 100;
    params.shuffle_classes = true;
    const auto ds = make_dataset(params);
    CHECK(ds.shuffled_classes);
    CHECK(imbalance_ratio(ds.global) == doctest::Approx(10.0));
  }

  TEST_CASE("text format roundtrip") {
    DatasetParams params;
    params.num_clients = 40;
    const auto ds = make_dataset(params);
    std::stringstream ss;
    write_dataset_text(ss, ds);
    const auto back = read_dataset_text(ss);
    CHECK(back.clients == ds.clients);
    CHECK(back.num_clients == 40);
    CHECK(back.samples_per_client == 128);
    CHECK(back.emd_target == ds.emd_target);
    CHECK(l1_distance(back.global, ds.global) < 1e-12);
    std::istringstream bad("hello\n");
    CHECK_THROWS_AS(read_dataset_text(bad), std::invalid_argument);
    const auto json = nlohmann::json::parse(dataset_to_json(ds));
    CHECK(json["clients"] == 40);
    CHECK(json["classes"] == 10);
  }
}
