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

#include "dubhe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dubhe/diagnostics.hpp"
#include "json.hpp"

namespace dubhe::selection {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom:
      return "random";
    case Strategy::kGreedy:
      return "greedy";
    case Strategy::kDubhe:
      return "dubhe";
  }
  return "dubhe";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "random") return Strategy::kRandom;
  if (text == "greedy") return Strategy::kGreedy;
  if (text == "dubhe") return Strategy::kDubhe;
  throw std::invalid_argument("unknown strategy '" + text + "' (expected random, greedy or dubhe)");
}

bool operator==(const SelectionOutcome& a, const SelectionOutcome& b) {
  return a.selected == b.selected && a.population.probs() == b.population.probs() && a.emd_star == b.emd_star &&
         a.tries_used == b.tries_used && a.best_try == b.best_try && a.per_try_emd == b.per_try_emd;
}

double participation_probability(const registry::Registry& own, const registry::AggregateRegistry& aggregate,
                                 std::size_t participants) {
  if (aggregate.support() == 0) throw std::invalid_argument("aggregate registry has no occupied category");
  const std::uint64_t same_category = aggregate.count_for(own);
  if (same_category == 0) throw std::invalid_argument("aggregate registry does not include this client");
  const double denom = static_cast<double>(same_category) * static_cast<double>(aggregate.support());
  return std::min(1.0, static_cast<double>(participants) / denom);
}

std::vector<double> participation_probabilities(std::span<const registry::Registration> registrations,
                                                const registry::AggregateRegistry& aggregate,
                                                std::size_t participants) {
  std::vector<double> out;
  out.reserve(registrations.size());
  std::size_t clamped = 0;
  for (const auto& r : registrations) {
    const std::uint64_t same = aggregate.count_for(r.registry);
    const double raw = static_cast<double>(participants) /
                       (static_cast<double>(same) * static_cast<double>(aggregate.support()));
    if (raw > 1.0) ++clamped;
    out.push_back(participation_probability(r.registry, aggregate, participants));
  }
  if (clamped > 0) {
    std::ostringstream os;
    os << clamped << " participation probabilities clamped to 1 (K = " << participants
       << ", occupied categories = " << aggregate.support() << "); expected participant count is no longer K";
    warn(os.str());
  }
  return out;
}

std::vector<std::size_t> draw_dubhe(std::span<const double> probabilities, Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    if (rng.uniform01() < probabilities[k]) out.push_back(k);
  }
  return out;
}

namespace {

// Uniform `count`-subset of `pool` via partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i, pool.size() - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

std::vector<std::size_t> fix_cardinality(std::vector<std::size_t> selected, std::size_t participants,
                                         std::size_t num_clients, Rng& rng) {
  if (participants > num_clients) throw std::invalid_argument("K exceeds the number of clients");
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  if (!selected.empty() && selected.back() >= num_clients) throw std::out_of_range("client id out of range");

  if (selected.size() < participants) {
    std::vector<std::size_t> outside;
    outside.reserve(num_clients - selected.size());
    std::size_t s = 0;
    for (std::size_t k = 0; k < num_clients; ++k) {
      if (s < selected.size() && selected[s] == k) {
        ++s;
      } else {
        outside.push_back(k);
      }
    }
    const auto extra = sample_without_replacement(std::move(outside), participants - selected.size(), rng);
    selected.insert(selected.end(), extra.begin(), extra.end());
  } else if (selected.size() > participants) {
    selected = sample_without_replacement(std::move(selected), participants, rng);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<std::size_t> select_random(std::size_t num_clients, std::size_t participants, Rng& rng) {
  if (participants > num_clients) throw std::invalid_argument("K exceeds the number of clients");
  std::vector<std::size_t> all(num_clients);
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto out = sample_without_replacement(std::move(all), participants, rng);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// KL(p || uniform) for p = counts / total: sum p ln p + ln C.
double kl_to_uniform(const std::vector<double>& counts, double total) {
  double acc = 0.0;
  for (double v : counts) {
    if (v <= 0.0) continue;
    const double p = v / total;
    acc += p * std::log(p);
  }
  return acc + std::log(static_cast<double>(counts.size()));
}

}  // namespace

std::vector<std::size_t> select_greedy(std::span<const dist::ClassHistogram> clients, std::size_t participants,
                                       Rng& rng) {
  const std::size_t n = clients.size();
  if (participants > n) throw std::invalid_argument("K exceeds the number of clients");
  if (participants == 0) return {};
  const std::size_t c = clients.front().num_classes();

  std::vector<char> taken(n, 0);
  std::vector<std::size_t> out;
  out.reserve(participants);
  std::vector<double> sum(c, 0.0);
  double total = 0.0;
  auto take = [&](std::size_t k) {
    taken[k] = 1;
    out.push_back(k);
    for (std::size_t j = 0; j < c; ++j) sum[j] += static_cast<double>(clients[k][j]);
    total += static_cast<double>(clients[k].total());
  };

  take(static_cast<std::size_t>(rng.uniform_int(0, n - 1)));
  std::vector<double> trial(c);
  while (out.size() < participants) {
    std::size_t best = n;
    double best_kl = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (taken[k]) continue;
      for (std::size_t j = 0; j < c; ++j) trial[j] = sum[j] + static_cast<double>(clients[k][j]);
      const double kl = kl_to_uniform(trial, total + static_cast<double>(clients[k].total()));
      if (kl < best_kl) {
        best_kl = kl;
        best = k;
      }
    }
    take(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> tentative_selection(const SelectionInputs& inputs, Strategy strategy,
                                             std::size_t participants, Rng& rng) {
  const std::size_t n = inputs.clients.size();
  switch (strategy) {
    case Strategy::kRandom:
      return select_random(n, participants, rng);
    case Strategy::kGreedy:
      return select_greedy(inputs.clients, participants, rng);
    case Strategy::kDubhe:
      if (inputs.probabilities.size() != n) throw std::invalid_argument("one probability per client required");
      return fix_cardinality(draw_dubhe(inputs.probabilities, rng), participants, n, rng);
  }
  throw std::logic_error("unknown strategy");
}

Rng try_stream(std::uint64_t seed, std::size_t try_index) { return Rng(derive_seed(seed, {try_index})); }

SelectionOutcome multi_time_select(const SelectionInputs& inputs, const SelectionConfig& config) {
  if (config.tries == 0) throw std::invalid_argument("H must be at least 1");
  if (config.participants == 0) throw std::invalid_argument("K must be at least 1");
  const std::size_t c = inputs.clients.empty() ? 0 : inputs.clients.front().num_classes();
  const auto uniform = dist::ClassDistribution::uniform(c);

  SelectionOutcome best;
  best.emd_star = std::numeric_limits<double>::infinity();
  best.per_try_emd.reserve(config.tries);
  for (std::size_t h = 0; h < config.tries; ++h) {
    Rng rng = try_stream(config.seed, h);
    auto chosen = tentative_selection(inputs, config.strategy, config.participants, rng);
    auto po = dist::population_distribution(inputs.clients, chosen);
    const double emd = dist::l1_distance(po, uniform);
    best.per_try_emd.push_back(emd);
    if (emd < best.emd_star) {
      best.emd_star = emd;
      best.selected = std::move(chosen);
      best.population = std::move(po);
      best.best_try = h;
    }
  }
  best.tries_used = config.tries;
  return best;
}

std::vector<std::vector<double>> default_grid(const std::vector<std::size_t>& sizes, std::size_t num_classes) {
  std::vector<std::vector<double>> axes;
  for (std::size_t size : sizes) {
    if (size == num_classes) continue;
    std::vector<double> axis;
    if (size == 1) {
      for (int t = 3; t <= 9; ++t) axis.push_back(t / 10.0);
    } else if (size == 2) {
      for (int t = 1; t <= 9; ++t) axis.push_back(t * 0.05);
    } else {
      for (int t = 1; t * 0.05 <= 1.0 / static_cast<double>(size) + 1e-12; ++t) axis.push_back(t * 0.05);
    }
    axes.push_back(std::move(axis));
  }
  std::vector<std::vector<double>> grid{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : grid) {
      for (double v : axis) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    }
    grid = std::move(next);
  }
  std::erase_if(grid, [&](const std::vector<double>& p) { return !registry::thresholds_valid(sizes, num_classes, p); });
  return grid;
}

dist::ClassDistribution expected_population(std::span<const dist::ClassHistogram> clients,
                                            const registry::RegistryScheme& scheme, std::size_t tries,
                                            std::size_t participants, std::uint64_t seed, std::size_t* support) {
  if (tries == 0) throw std::invalid_argument("H must be at least 1");
  std::vector<registry::Registration> regs;
  regs.reserve(clients.size());
  for (const auto& h : clients) regs.push_back(registry::register_client(h, scheme));
  std::vector<registry::Registry> raw;
  raw.reserve(regs.size());
  for (const auto& r : regs) raw.push_back(r.registry);
  const auto agg = registry::aggregate(raw);
  if (support != nullptr) *support = agg.support();
  const auto probs = participation_probabilities(regs, agg, participants);

  const std::size_t c = scheme.num_classes();
  std::vector<double> mean(c, 0.0);
  const SelectionInputs inputs{clients, probs};
  for (std::size_t h = 0; h < tries; ++h) {
    Rng rng = try_stream(seed, h);
    const auto chosen = tentative_selection(inputs, Strategy::kDubhe, participants, rng);
    const auto po = dist::population_distribution(clients, chosen);
    for (std::size_t j = 0; j < c; ++j) mean[j] += po[j];
  }
  return dist::ClassDistribution::normalized(mean);
}

SearchResult parameter_search(std::span<const dist::ClassHistogram> clients, std::size_t num_classes,
                              const std::vector<std::size_t>& sizes, const std::vector<std::vector<double>>& grid,
                              std::size_t tries, std::size_t participants, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("parameter grid is empty");
  const auto uniform = dist::ClassDistribution::uniform(num_classes);
  SearchResult result;
  result.best_score = std::numeric_limits<double>::infinity();
  bool any_valid = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SearchPoint point;
    point.thresholds = grid[g];
    if (!registry::thresholds_valid(sizes, num_classes, grid[g], &point.reason)) {
      result.trace.push_back(std::move(point));
      continue;
    }
    point.valid = true;
    const auto scheme = registry::RegistryScheme::with_free_thresholds(num_classes, sizes, grid[g]);
    const auto expected = expected_population(clients, scheme, tries, participants, seed, &point.support);
    point.score = dist::l1_distance(expected, uniform);
    if (!any_valid || point.score < result.best_score) {
      result.best_score = point.score;
      result.best_thresholds = point.thresholds;
      result.best_index = g;
      any_valid = true;
    }
    result.trace.push_back(std::move(point));
  }
  if (!any_valid) throw std::invalid_argument("no valid point in the parameter grid");
  return result;
}

std::string to_json(const SelectionOutcome& outcome) {
  nlohmann::ordered_json j;
  j["selected"] = outcome.selected;
  j["population"] = outcome.population.probs();
  j["emd_star"] = outcome.emd_star;
  j["tries_used"] = outcome.tries_used;
  j["best_try"] = outcome.best_try;
  j["per_try_emd"] = outcome.per_try_emd;
  return j.dump();
}

std::string to_json(const SearchPoint& point) {
  nlohmann::ordered_json j;
  j["thresholds"] = point.thresholds;
  j["valid"] = point.valid;
  if (point.valid) {
    j["score"] = point.score;
    j["support"] = point.support;
  } else {
    j["reason"] = point.reason;
  }
  return j.dump();
}

}  // namespace dubhe::selection
