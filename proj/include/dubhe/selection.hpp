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

#ifndef DUBHE_SELECTION_HPP_
#define DUBHE_SELECTION_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dubhe/distributions.hpp"
#include "dubhe/random.hpp"
#include "dubhe/registry.hpp"

namespace dubhe::selection {

enum class Strategy { kRandom, kGreedy, kDubhe };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

struct SelectionConfig {
  std::size_t participants = 20;  // K
  std::size_t tries = 1;          // H
  Strategy strategy = Strategy::kDubhe;
  std::uint64_t seed = 0;
};

struct SelectionOutcome {
  std::vector<std::size_t> selected;  // ascending client ids, exactly K
  dist::ClassDistribution population;  // p_o of the chosen try
  double emd_star = 0.0;              // ||p_o - p_u||_1 of the chosen try
  std::size_t tries_used = 0;
  std::size_t best_try = 0;
  std::vector<double> per_try_emd;

  friend bool operator==(const SelectionOutcome& a, const SelectionOutcome& b);
};

/// P = min(1, K / (R_A(u) * ||R_A||_0)) with R_A(u) = R . R_A^T.
double participation_probability(const registry::Registry& own, const registry::AggregateRegistry& aggregate,
                                 std::size_t participants);

/// Probabilities for every registered client. Warns once when any value is
/// clamped to 1, since the expected-count identities then no longer hold.
std::vector<double> participation_probabilities(std::span<const registry::Registration> registrations,
                                                const registry::AggregateRegistry& aggregate,
                                                std::size_t participants);

/// Independent Bernoulli draw per client, in client-id order. Ascending ids.
std::vector<std::size_t> draw_dubhe(std::span<const double> probabilities, Rng& rng);

/// Tops up with uniformly chosen non-members, or removes uniformly chosen
/// members, until exactly K clients remain. Ascending ids.
std::vector<std::size_t> fix_cardinality(std::vector<std::size_t> selected, std::size_t participants,
                                         std::size_t num_clients, Rng& rng);

/// Uniform K-subset of [0, N). Ascending ids.
std::vector<std::size_t> select_random(std::size_t num_clients, std::size_t participants, Rng& rng);

/// Uniform seed client, then repeatedly adds the client that minimizes
/// KL(p_o || p_u) of the tentative set; ties to the lowest id. Ascending ids.
std::vector<std::size_t> select_greedy(std::span<const dist::ClassHistogram> clients, std::size_t participants,
                                       Rng& rng);

/// Everything a single tentative selection may need. `probabilities` is only
/// read by the Dubhe strategy.
struct SelectionInputs {
  std::span<const dist::ClassHistogram> clients;
  std::span<const double> probabilities;
};

/// One full selection (for Dubhe: draw then fix cardinality).
std::vector<std::size_t> tentative_selection(const SelectionInputs& inputs, Strategy strategy,
                                             std::size_t participants, Rng& rng);

/// Random stream of try h: Rng(derive_seed(seed, {h})).
Rng try_stream(std::uint64_t seed, std::size_t try_index);

/// H independent selections; keeps the one whose p_o is closest to uniform
/// in L1, ties to the earliest try.
SelectionOutcome multi_time_select(const SelectionInputs& inputs, const SelectionConfig& config);

// --- parameter search -------------------------------------------------------

struct SearchPoint {
  std::vector<double> thresholds;  // free thresholds in G order
  bool valid = false;
  std::string reason;              // why an invalid point was skipped
  double score = 0.0;              // ||E_h(p_{o,h}) - p_u||_1
  std::size_t support = 0;         // ||R_A||_0 under these thresholds
};

struct SearchResult {
  std::vector<double> best_thresholds;
  double best_score = 0.0;
  std::size_t best_index = 0;
  std::vector<SearchPoint> trace;
};

/// sigma_1 in {0.3..0.9} x sigma_2 in {0.05..0.45}; further sizes i get
/// {0.05, 0.10, ...} up to 1/i. Points violating sigma_i <= 1/i are dropped.
std::vector<std::vector<double>> default_grid(const std::vector<std::size_t>& sizes, std::size_t num_classes);

/// Mean population distribution over H Dubhe tries for one threshold vector.
/// Try h uses try_stream(seed, h) so every grid point sees the same streams.
dist::ClassDistribution expected_population(std::span<const dist::ClassHistogram> clients,
                                            const registry::RegistryScheme& scheme, std::size_t tries,
                                            std::size_t participants, std::uint64_t seed,
                                            std::size_t* support = nullptr);

/// Evaluates every grid point and returns the argmin of the score; ties to
/// the first point in grid order. Throws if no point is valid.
SearchResult parameter_search(std::span<const dist::ClassHistogram> clients, std::size_t num_classes,
                              const std::vector<std::size_t>& sizes, const std::vector<std::vector<double>>& grid,
                              std::size_t tries, std::size_t participants, std::uint64_t seed);

std::string to_json(const SelectionOutcome& outcome);
std::string to_json(const SearchPoint& point);

}  // namespace dubhe::selection

#endif  // DUBHE_SELECTION_HPP_
