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

#ifndef DUBHE_FL_TRAIN_HPP_
#define DUBHE_FL_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dubhe/distributions.hpp"
#include "dubhe/selection.hpp"

namespace dubhe::fl {

/// Gaussian classes around unit-norm means with shared isotropic noise.
struct SyntheticTask {
  std::size_t num_classes = 10;
  std::size_t dim = 16;
  double noise = 0.35;
  std::uint64_t seed = 1;
  std::vector<std::vector<double>> means;  // num_classes x dim, unit norm

  /// Draws means until every pair is further apart than 2 * noise.
  static SyntheticTask make(std::size_t num_classes, std::size_t dim, double noise, std::uint64_t seed);

  double min_centroid_distance() const;
  /// Sample number `index` of class `cls` under `stream_seed`; a pure function
  /// of its arguments.
  void sample(std::size_t cls, std::uint64_t stream_seed, std::uint64_t index, std::span<double> out) const;
};

/// Row-major features with one label per row.
struct LabeledData {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  std::vector<std::uint64_t> label_histogram(std::size_t num_classes) const;
};

/// counts[j] samples of class j, grouped by class.
LabeledData materialize_client_data(const SyntheticTask& task, const dist::ClassHistogram& histogram,
                                    std::uint64_t seed);
LabeledData uniform_dataset(const SyntheticTask& task, std::size_t per_class, std::uint64_t seed);

/// Softmax regression. Weights are stored class-major (row c holds the
/// weights feeding logit c), plus one bias per class.
struct ModelWeights {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // num_classes * dim
  std::vector<double> bias;     // num_classes

  static ModelWeights zeros(std::size_t num_classes, std::size_t dim);
  std::span<double> row(std::size_t c) { return {weights.data() + c * dim, dim}; }
  std::span<const double> row(std::size_t c) const { return {weights.data() + c * dim, dim}; }
  bool same_shape(const ModelWeights& o) const { return num_classes == o.num_classes && dim == o.dim; }
  bool finite() const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

enum class Optimizer { kSgd, kAdam };
std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& text);

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t local_epochs = 1;
  std::uint64_t samples_per_client = 128;
  double learning_rate = 0.05;
  std::size_t rounds = 200;
  std::size_t participants = 20;
  Optimizer optimizer = Optimizer::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Mean cross-entropy over `rows` (all rows when empty) and, if `gradient`
/// is non-null, its gradient with the same shape as `w`.
double loss_and_gradient(const ModelWeights& w, const LabeledData& data, std::span<const std::size_t> rows,
                         ModelWeights* gradient);

/// E epochs of mini-batch training, shuffled by `seed`. Throws
/// std::runtime_error on a non-finite loss.
ModelWeights local_train(const ModelWeights& w, const LabeledData& data, const TrainConfig& config,
                         std::uint64_t seed);

/// Unweighted element-wise mean.
ModelWeights aggregate(std::span<const ModelWeights> models);

/// Top-1 accuracy.
double evaluate(const ModelWeights& w, const LabeledData& test);

/// Euclidean norm of the difference over weights and biases.
double weight_divergence(const ModelWeights& a, const ModelWeights& b);

/// Central reference model: mini-batch training on uniform-label data of
/// `samples` rows for up to `max_epochs`, stopping early once the full
/// gradient norm drops below `tolerance`.
ModelWeights train_reference(const SyntheticTask& task, const TrainConfig& config, std::size_t samples,
                             std::uint64_t seed, std::size_t max_epochs = 200, double tolerance = 1e-6);

struct RoundRecord {
  std::size_t round = 0;
  selection::Strategy strategy = selection::Strategy::kRandom;
  double accuracy = 0.0;
  double emd_po_pu = 0.0;
  double weight_divergence = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::vector<selection::Strategy> strategies{selection::Strategy::kRandom, selection::Strategy::kGreedy,
                                              selection::Strategy::kDubhe};
  std::vector<std::size_t> sizes{1, 2, 10};  // reference set G
  std::vector<double> thresholds{0.7, 0.1};  // free thresholds for the Dubhe scheme
  std::size_t tries = 1;                     // H
  std::size_t test_per_class = 200;
  bool with_reference = true;                // train omega* and report divergence
  std::size_t workers = 1;
};

/// One FedAvg run per (seed, strategy). Records are ordered by seed, then
/// strategy in config order, then round.
std::vector<RoundRecord> run_experiment(const dist::FederationDataset& dataset, const SyntheticTask& task,
                                        const ExperimentConfig& experiment, const TrainConfig& train,
                                        std::span<const std::uint64_t> seeds);

/// Mean accuracy over the last `window` rounds of one (strategy, seed) run.
double tail_accuracy(std::span<const RoundRecord> trace, selection::Strategy strategy, std::uint64_t seed,
                     std::size_t window = 50);

void write_trace_csv(std::ostream& os, std::span<const RoundRecord> trace);

}  // namespace dubhe::fl

#endif  // DUBHE_FL_TRAIN_HPP_
