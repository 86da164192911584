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

#ifndef DUBHE_DISTRIBUTIONS_HPP_
#define DUBHE_DISTRIBUTIONS_HPP_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "dubhe/random.hpp"

namespace dubhe::dist {

/// Per-class sample counts of one (virtual) client.
class ClassHistogram {
 public:
  ClassHistogram() = default;
  explicit ClassHistogram(std::vector<std::uint64_t> counts);

  std::size_t num_classes() const { return counts_.size(); }
  std::uint64_t total() const { return total_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t operator[](std::size_t j) const { return counts_[j]; }

  friend bool operator==(const ClassHistogram& a, const ClassHistogram& b) { return a.counts_ == b.counts_; }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// A probability vector over classes. Entries are non-negative and sum to 1.
class ClassDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ClassDistribution() = default;
  /// Validates non-negativity and unit sum.
  explicit ClassDistribution(std::vector<double> probs);
  static ClassDistribution uniform(std::size_t num_classes);
  /// Normalizes a non-negative vector with positive sum.
  static ClassDistribution normalized(std::span<const double> weights);
  static ClassDistribution from_histogram(const ClassHistogram& h);

  std::size_t num_classes() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  double operator[](std::size_t j) const { return probs_[j]; }

 private:
  std::vector<double> probs_;
};

inline constexpr double kInfiniteRatio = std::numeric_limits<double>::infinity();

/// sum_j |p_j - q_j|, in [0, 2].
double l1_distance(const ClassDistribution& p, const ClassDistribution& q);
/// Most frequent over least frequent class; kInfiniteRatio when some class is empty.
double imbalance_ratio(const ClassHistogram& h);
double imbalance_ratio(const ClassDistribution& p);
/// sum_j p_j ln(p_j / q_j), with 0 ln 0 = 0; +infinity if q_j = 0 < p_j.
double kl_divergence(const ClassDistribution& p, const ClassDistribution& q);

/// Half-normal class profile q_j ~ exp(-alpha j^2), alpha = ln(rho) / (C - 1)^2,
/// so q_0 / q_{C-1} = rho.
ClassDistribution generate_global_proportions(std::size_t num_classes, double rho);

/// Applies a uniformly random permutation to the class axis.
ClassDistribution shuffle_classes(const ClassDistribution& p, Rng& rng);

/// Largest-remainder rounding of `weights` (non-negative, any scale) to
/// integers summing to `total`. Ties go to the lower index.
std::vector<std::uint64_t> largest_remainder(std::span<const double> weights, std::uint64_t total);

/// Distribution of the data contributed by a set of clients: the normalized
/// element-wise sum of their counts.
ClassDistribution population_distribution(std::span<const ClassHistogram> selected);
ClassDistribution population_distribution(std::span<const ClassHistogram> all, std::span<const std::size_t> ids);

/// Mean over clients of ||p_l^k - reference||_1.
double mean_emd(std::span<const ClassHistogram> clients, const ClassDistribution& reference);
/// ||p_l^k - p_o||_1 for one client against a population distribution.
double client_emd(const ClassHistogram& client, const ClassDistribution& population);

/// How many dominating classes each client's skew component covers.
enum class SkewFamily {
  kTwoClass,  // every client: half of the skew mass on each of two distinct classes
  kOneClass,  // every client: all skew mass on one class
  kAuto,      // two-class, mixing in the smallest number of one-class clients
              // (in steps of 10% of N) needed to reach the target
};

std::string to_string(SkewFamily family);
SkewFamily parse_skew_family(const std::string& text);

struct PartitionOptions {
  SkewFamily family = SkewFamily::kAuto;
  double bisection_tolerance = 0.005;
  int max_bisection_iterations = 60;
};

struct FederationDataset {
  std::size_t num_classes = 0;
  std::size_t num_clients = 0;
  std::uint64_t samples_per_client = 0;  // N_VC
  std::vector<ClassHistogram> clients;
  ClassDistribution global;               // target global profile p_g
  double rho_target = 1.0;
  double rho_realized = 1.0;               // from the emitted integer counts
  double emd_target = 0.0;
  double emd_realized = 0.0;               // mean ||p_l^k - p_g||_1 from emitted counts
  double mixing = 0.0;                     // lambda found by bisection
  double one_class_fraction = 0.0;
  SkewFamily family = SkewFamily::kAuto;
  bool shuffled_classes = false;
  std::uint64_t seed = 0;

  /// Label distribution of all clients' data pooled.
  ClassDistribution realized_global() const;
};

class InfeasibleTarget : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Builds N clients with N_VC samples each. Client k follows
///   p_l^k = (1 - lambda) p_g + lambda d^k,
/// where d^k puts its mass on one or two dominating classes drawn without
/// replacement from an urn holding round(2N p_g) half-client units, so the
/// pooled data keeps the global profile p_g. lambda is found by bisection so
/// the mean L1 distance to p_g hits `target_emd`. Counts come from
/// largest-remainder rounding per client followed by a column repair that
/// restores the pooled class totals.
FederationDataset generate_client_partitions(const ClassDistribution& global, std::size_t num_clients,
                                             std::uint64_t samples_per_client, double target_emd, Rng& rng,
                                             const PartitionOptions& options = {});

struct DatasetParams {
  std::size_t num_classes = 10;
  std::size_t num_clients = 1000;
  std::uint64_t samples_per_client = 128;
  double rho = 10.0;
  double emd = 1.5;
  std::uint64_t seed = 1;
  bool shuffle_classes = false;
  SkewFamily family = SkewFamily::kAuto;
};

/// Global profile plus partitions, deterministic in params.
FederationDataset make_dataset(const DatasetParams& params);

// Text format:
//   # dubhe-dataset v1
//   # key = value            (metadata lines)
//   <client id> <c_0> ... <c_{C-1}>
void write_dataset_text(std::ostream& os, const FederationDataset& ds);
FederationDataset read_dataset_text(std::istream& is);
std::string dataset_to_json(const FederationDataset& ds);

}  // namespace dubhe::dist

#endif  // DUBHE_DISTRIBUTIONS_HPP_
